"""Truncated free-space Green's functions and their Fourier transforms.

Each kernel ``g`` is cut off at radius ``L`` (``g_L = g * rect(r / 2L)``),
which makes its Fourier transform ``G_L(s) = int e^{-i s.x} g_L(x) dx`` an
entire function of ``s``. The closed forms below are the standard ones for
the Laplace, Helmholtz and biharmonic operators in two and three
dimensions, plus the two derived families (``laplace_helmholtz`` and the
convected Helmholtz kernel).

The closed forms are quotients that are 0/0 at a few isolated points
(``s = 0``, ``s = k``). Close to those points they lose digits to
cancellation, so there the same analytic function is evaluated from its
Taylor series instead. The Taylor coefficients are obtained from a Cauchy
integral of the closed form over a circle in the complex ``s`` plane, where
the closed form is well conditioned.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

FAMILIES = (
    "laplace",
    "helmholtz",
    "biharmonic",
    "laplace_helmholtz",
    "convected_helmholtz",
)
DEFAULT_L = {2: 1.5, 3: 1.8}

# Families whose Green's function blows up at r = 0.
_SINGULAR_AT_ORIGIN = {"laplace", "helmholtz", "convected_helmholtz"}

# Switch radius around each removable point, in units of 1/L. Inside it the
# Taylor branch is used. Chosen so that the closed form carries <= ~1e-13
# relative error outside the radius (see tests/test_kernels.py).
_SWITCH = {
    (3, "laplace"): 0.05,
    (3, "helmholtz"): 0.05,
    (3, "biharmonic"): 0.6,
    (2, "laplace"): 0.25,
    (2, "helmholtz"): 0.1,
    (2, "biharmonic"): 0.6,
}
_CAUCHY_RATIO = 2.5  # contour radius / switch radius
_CAUCHY_NODES = 64
_TAYLOR_TERMS = 48


@dataclass(frozen=True)
class KernelSpec:
    """Operator family and parameters of a truncated kernel.

    Parameters
    ----------
    dim : {2, 3}
    family : str
        One of :data:`FAMILIES`.
    k : float
        Wavenumber for ``helmholtz`` and ``laplace_helmholtz``. Ignored for
        ``convected_helmholtz``, whose wavenumber is ``|h_vec|``.
    h_vec : tuple of float, optional
        Convection vector, ``convected_helmholtz`` only.
    L : float, optional
        Truncation radius, defaults to 1.8 in 3D and 1.5 in 2D. Must exceed
        ``sqrt(dim)`` so the unit box is covered.
    """

    dim: int
    family: str
    k: float = 0.0
    h_vec: tuple | None = None
    L: float | None = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.L is None:
            object.__setattr__(self, "L", DEFAULT_L[self.dim])
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "k", float(self.k))
        if not self.L > math.sqrt(self.dim):
            raise ValueError(f"L = {self.L} must exceed sqrt({self.dim})")
        if self.family == "convected_helmholtz":
            if self.h_vec is None or len(self.h_vec) != self.dim:
                raise ValueError("convected_helmholtz needs an h_vec of length dim")
            h = tuple(float(c) for c in self.h_vec)
            object.__setattr__(self, "h_vec", h)
            if math.hypot(*h) == 0:
                raise ValueError("h_vec must be nonzero")
        elif self.h_vec is not None:
            raise ValueError("h_vec is only meaningful for convected_helmholtz")
        if self.family in ("helmholtz", "laplace_helmholtz") and not self.k > 0:
            raise ValueError(f"{self.family} needs k > 0")

    @property
    def wavenumber(self) -> float:
        if self.family == "convected_helmholtz":
            return math.hypot(*self.h_vec)
        return self.k

    @property
    def radial(self) -> bool:
        """True if the kernel depends on ``|x|`` only."""
        return self.family != "convected_helmholtz"

    @property
    def real_symmetric(self) -> bool:
        """True for kernels whose transform is real (laplace, biharmonic)."""
        return self.family in ("laplace", "biharmonic")

    def profile(self) -> "KernelSpec":
        """Radial kernel whose transform is shifted to give this one.

        For the convected kernel this is the Helmholtz kernel with
        ``k = |h_vec|``; every other family is its own profile.
        """
        if self.family == "convected_helmholtz":
            return KernelSpec(self.dim, "helmholtz", k=self.wavenumber, L=self.L)
        return self


# ---------------------------------------------------------------- physical


def _untruncated(spec: KernelSpec, r):
    """Free-space kernel as a function of distance (radial families)."""
    k, d, fam = spec.k, spec.dim, spec.family
    with np.errstate(divide="ignore", invalid="ignore"):
        if d == 3:
            if fam == "laplace":
                return 1 / (4 * np.pi * r) + 0j
            if fam == "helmholtz":
                return np.exp(1j * k * r) / (4 * np.pi * r)
            if fam == "biharmonic":
                return r / (8 * np.pi) + 0j
            if fam == "laplace_helmholtz":
                # (e^{ikr} - 1) / (4 pi r), finite at r = 0
                out = np.expm1(1j * k * r) / (4 * np.pi * r)
                return np.where(r == 0, 1j * k / (4 * np.pi), out)
        else:
            if fam == "laplace":
                return -np.log(r) / (2 * np.pi) + 0j
            if fam == "helmholtz":
                return 0.25j * special.hankel1(0, k * r)
            if fam == "biharmonic":
                out = -(r**2) / (8 * np.pi) * (np.log(r) - 1)
                return np.where(r == 0, 0.0, out) + 0j
            if fam == "laplace_helmholtz":
                out = 0.25j * special.hankel1(0, k * r) + np.log(r) / (2 * np.pi)
                at0 = 0.25j - (np.log(k / 2) + np.euler_gamma) / (2 * np.pi)
                return np.where(r == 0, at0, out)
    raise AssertionError(fam)


def eval_physical(spec: KernelSpec, r_vec):
    """Truncated kernel ``g(x) rect(|x| / 2L)`` at points ``r_vec``.

    ``r_vec`` has shape ``(..., dim)``. On the sphere ``|x| = L`` the
    half-value convention is used.

    Raises
    ------
    ValueError
        If a point is the origin and the family is singular there.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    if r_vec.shape[-1] != spec.dim:
        raise ValueError(f"r_vec must have trailing dimension {spec.dim}")
    r = np.sqrt(np.sum(r_vec**2, axis=-1))
    if spec.family in _SINGULAR_AT_ORIGIN and np.any(r == 0):
        raise ValueError(f"{spec.family} kernel is singular at the origin")
    g = _untruncated(spec.profile(), r)
    if spec.family == "convected_helmholtz":
        g = g * np.exp(1j * (r_vec @ np.asarray(spec.h_vec)))
    weight = np.where(r < spec.L, 1.0, np.where(r == spec.L, 0.5, 0.0))
    return np.where(weight > 0, g * weight, 0.0)


# ---------------------------------------------------------------- spectral


def _jv(order, z):
    if np.iscomplexobj(z):
        return special.jv(order, z)
    return special.j0(z) if order == 0 else special.j1(z)


def _closed_form(dim, family, k, L, s):
    """Table formulas, valid away from their removable points.

    ``s`` may be complex (used by the Cauchy integral).
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if dim == 3:
            if family == "laplace":
                return 2 * (np.sin(L * s / 2) / s) ** 2
            if family == "helmholtz":
                num = -1 + np.exp(1j * L * k) * (
                    np.cos(L * s) - 1j * (k / s) * np.sin(L * s)
                )
                return num / ((k - s) * (k + s))
            if family == "biharmonic":
                Ls = L * s
                return ((2 - Ls**2) * np.cos(Ls) + 2 * Ls * np.sin(Ls) - 2) / (2 * s**4)
        else:
            logL = math.log(L)
            j0 = _jv(0, L * s)
            j1 = _jv(1, L * s)
            if family == "laplace":
                return (1 - j0) / s**2 - L * logL * j1 / s
            if family == "helmholtz":
                h0 = special.hankel1(0, L * k)
                h1 = special.hankel1(1, L * k)
                num = 1 + 0.5j * np.pi * L * s * j1 * h0 - 0.5j * np.pi * L * k * j0 * h1
                return num / (s**2 - k**2)
            if family == "biharmonic":
                return (
                    (j0 - 1) / s**4
                    - L**3 * (logL - 1) * j1 / (4 * s)
                    + L * logL * j1 / s**3
                    - L**2 * (2 * logL - 1) * j0 / (4 * s**2)
                )
    raise AssertionError((dim, family))


def _removable_points(dim, family, k):
    if family == "helmholtz":
        return (0.0, k) if dim == 3 else (k,)
    return (0.0,)


@functools.lru_cache(maxsize=256)
def _taylor(dim, family, k, L, pole):
    """Taylor coefficients of a base family about one removable point.

    Returns ``(coefficients, switch_radius)``.
    """
    r_sw = _SWITCH[(dim, family)] / L
    rho = _CAUCHY_RATIO * r_sw
    others = [p for p in _removable_points(dim, family, k) if p != pole]
    # keep the contour clear of the other removable points
    for p in others:
        gap = abs(abs(p - pole) - rho)
        if gap < 0.4 * rho:
            rho = max(rho * 0.55, abs(p - pole) + 0.45 * rho) if abs(p - pole) < rho else rho * 0.55
    r_sw = min(r_sw, rho / _CAUCHY_RATIO)
    theta = 2 * np.pi * np.arange(_CAUCHY_NODES) / _CAUCHY_NODES
    z = pole + rho * np.exp(1j * theta)
    f = _closed_form(dim, family, k, L, z)
    if not np.all(np.isfinite(f)):
        raise FloatingPointError("non-finite closed form on Cauchy contour")
    c = np.fft.fft(f) / _CAUCHY_NODES
    c = c[:_TAYLOR_TERMS] / rho ** np.arange(_TAYLOR_TERMS)
    return c, r_sw


def _taylor_eval(coeffs, t):
    out = np.zeros(np.shape(t), dtype=complex)
    for c in coeffs[::-1]:
        out = out * t + c
    return out


def near_singularity_eval(spec: KernelSpec, s, pole: float):
    """Series evaluation of a radial transform about a removable point.

    Parameters
    ----------
    spec : KernelSpec
        Base family (``laplace``, ``helmholtz``, ``biharmonic``); the
        composite families delegate to their parts.
    s : array_like
        Radial frequencies with ``|s - pole|`` inside the switch radius.
    pole : float
        The removable point, ``0`` or ``k``.
    """
    spec = spec.profile()
    if spec.family == "laplace_helmholtz":
        raise ValueError("evaluate the laplace and helmholtz parts separately")
    if pole not in _removable_points(spec.dim, spec.family, spec.k):
        raise ValueError(f"{pole} is not a removable point of {spec.family}")
    coeffs, _ = _taylor(spec.dim, spec.family, spec.k, spec.L, float(pole))
    return _taylor_eval(coeffs, np.asarray(s, dtype=float) - pole)


def switch_radius(spec: KernelSpec, pole: float) -> float:
    """Distance from ``pole`` inside which the series branch is used."""
    spec = spec.profile()
    return _taylor(spec.dim, spec.family, spec.k, spec.L, float(pole))[1]


def _base_radial(dim, family, k, L, s):
    s = np.asarray(s, dtype=float)
    out = np.asarray(_closed_form(dim, family, k, L, s), dtype=complex)
    for pole in _removable_points(dim, family, k):
        coeffs, r_sw = _taylor(dim, family, k, L, pole)
        near = np.abs(s - pole) < r_sw
        if np.any(near):
            out[near] = _taylor_eval(coeffs, s[near] - pole)
    return out


def eval_spectral_radial(spec: KernelSpec, s):
    """Transform of a radial kernel as a function of ``|s|``.

    For ``convected_helmholtz`` this is the profile evaluated at
    ``|s - h_vec|``.
    """
    spec = spec.profile()
    s = np.asarray(s, dtype=float)
    d, k, L = spec.dim, spec.k, spec.L
    if spec.family == "laplace_helmholtz":
        return _base_radial(d, "helmholtz", k, L, s) - _base_radial(d, "laplace", k, L, s)
    out = _base_radial(d, spec.family, k, L, s)
    if spec.real_symmetric:
        out = out.real + 0j
    return out


def eval_spectral(spec: KernelSpec, s_vec):
    """Fourier transform of the truncated kernel at frequencies ``s_vec``.

    ``s_vec`` has shape ``(..., dim)``; returns complex values of shape
    ``s_vec.shape[:-1]``.
    """
    s_vec = np.asarray(s_vec, dtype=float)
    if s_vec.shape[-1] != spec.dim:
        raise ValueError(f"s_vec must have trailing dimension {spec.dim}")
    if spec.family == "convected_helmholtz":
        s_vec = s_vec - np.asarray(spec.h_vec)
    s = np.sqrt(np.sum(s_vec**2, axis=-1))
    return eval_spectral_radial(spec, s)


def free_space_spectral(spec: KernelSpec, s):
    """Transform of the untruncated kernel (a distribution; ``nan`` at poles)."""
    spec = spec.profile()
    s = np.asarray(s, dtype=float)
    k = spec.k
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = 1 / s**2
        helm = 1 / (s**2 - k**2)
        table = {
            "laplace": lap,
            "helmholtz": helm,
            "biharmonic": -1 / s**4,
            "laplace_helmholtz": helm - lap,
        }
    out = np.asarray(table[spec.family], dtype=complex)
    return np.where(np.isfinite(out), out, np.nan)


# ------------------------------------------------------------------ oracle


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


def radial_transform_oracle(spec: KernelSpec, s: float, tol: float = 1e-12):
    """Transform of the truncated kernel by adaptive radial quadrature.

    Integrates ``4 pi int_0^L sinc(s r) g(r) r^2 dr`` (3D) or
    ``2 pi int_0^L J0(s r) g(r) r dr`` (2D) piecewise over half-periods of
    the oscillatory factors. Independent of the closed forms.
    For ``convected_helmholtz`` ``s`` is the shifted magnitude ``|s - h|``.

    Raises
    ------
    QuadratureError
        If the summed error estimate exceeds ``max(tol, 1e-10 |value|)``.
    """
    spec = spec.profile()
    s = float(s)
    L, k = spec.L, spec.k

    if spec.dim == 3:

        def f(r):
            return 4 * np.pi * np.sinc(s * r / np.pi) * _untruncated(spec, r) * r * r

    else:

        def f(r):
            return 2 * np.pi * special.j0(s * r) * _untruncated(spec, r) * r

    nseg = int(math.ceil(L * (s + k) / np.pi)) + 1
    edges = np.linspace(0.0, L, nseg + 1)
    total, err = 0j, 0.0
    with warnings.catch_warnings():
        # roundoff warnings are expected at these tolerances; the summed
        # error estimate below is what decides success
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            for unit, part in ((1.0, np.real), (1j, np.imag)):
                val, e = integrate.quad(
                    lambda r: part(f(r)), a, b, epsabs=1e-16, epsrel=1e-14, limit=200
                )
                total += unit * val
                err += e
    if err > max(tol, 1e-10 * abs(total)):
        raise QuadratureError(f"radial transform at s={s}", err)
    return total

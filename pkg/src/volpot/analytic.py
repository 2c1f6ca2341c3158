"""Reference solutions, contrast functions, incident fields and dielectrics.

The Gaussian sources are normalized to unit mass,
``rho = exp(-r^2 / 2 sigma^2) / (sigma sqrt(2 pi))^dim``. Their potentials
``g * rho`` have closed forms for the six (family, dim) pairs handled by
:func:`gaussian_exact`. Each closed form here has been checked against
:func:`quadrature_convolution_oracle`, which integrates the convolution
directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import specfun
from .grid import GridSpec, read_field

GAUSSIAN_PAIRS = (
    (3, "laplace"),
    (3, "helmholtz"),
    (3, "biharmonic"),
    (2, "laplace"),
    (2, "helmholtz"),
    (2, "biharmonic"),
)


# ----------------------------------------------------------- Gaussian suite


@dataclass(frozen=True)
class GaussianSource:
    sigma: float
    dim: int

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")

    def density(self, r):
        s = self.sigma
        return np.exp(-np.asarray(r) ** 2 / (2 * s * s)) / (s * math.sqrt(2 * math.pi)) ** self.dim

    def sample(self, grid: GridSpec) -> np.ndarray:
        return self.density(grid.radius())


def gaussian_exact(family: str, dim: int, sigma: float, r, k: float = 0.0):
    """Potential of the unit Gaussian under the free-space kernel.

    Parameters
    ----------
    family : {"laplace", "helmholtz", "biharmonic"}
    dim : {2, 3}
    sigma : float
    r : array_like
        Distances from the source center, ``r >= 0``.
    k : float
        Wavenumber, Helmholtz only.
    """
    if (dim, family) not in GAUSSIAN_PAIRS:
        raise ValueError(f"no Gaussian solution for {family} in {dim}D")
    if family == "helmholtz" and not k > 0:
        raise ValueError("helmholtz needs k > 0")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    fn = {
        (3, "laplace"): _lap3,
        (3, "helmholtz"): _helm3,
        (3, "biharmonic"): _bih3,
        (2, "laplace"): _lap2,
        (2, "helmholtz"): _helm2,
        (2, "biharmonic"): _bih2,
    }[(dim, family)]
    out = fn(r, float(sigma), float(k))
    return out if out.ndim else out[()]


def _safe_r(r):
    return np.where(r > 0, r, 1.0)


def _lap3(r, s, k):
    rr = _safe_r(r)
    val = special.erf(rr / (math.sqrt(2) * s)) / (4 * np.pi * rr)
    at0 = 1 / (2 * math.sqrt(2) * np.pi**1.5 * s)
    return np.where(r > 0, val, at0) + 0j


def _helm3(r, s, k):
    rr = _safe_r(r)
    damp = math.exp(-0.5 * (s * k) ** 2)
    w = (1j * s * s * k - rr) / (math.sqrt(2) * s)
    core = 1j * np.sin(k * rr) - np.real(np.exp(-1j * k * rr) * specfun.erf_complex(w))
    val = damp * core / (4 * np.pi * rr)
    at0 = damp / (4 * np.pi) * (
        1j * k - k * specfun.erfi(s * k / math.sqrt(2))
        + math.sqrt(2 / np.pi) * math.exp(0.5 * (s * k) ** 2) / s
    )
    return np.where(r > 0, val, at0)


def _bih3(r, s, k):
    rr = _safe_r(r)
    val = (
        s * math.sqrt(2 / np.pi) * np.exp(-rr * rr / (2 * s * s))
        + special.erf(rr / (math.sqrt(2) * s)) * (s * s / rr + rr)
    ) / (8 * np.pi)
    at0 = 2 * s * math.sqrt(2 / np.pi) / (8 * np.pi)
    return np.where(r > 0, val, at0) + 0j


def _lap2(r, s, k):
    x = r * r / (2 * s * s)
    return -(specfun.ein(x) - specfun.EULER_GAMMA + math.log(2 * s * s)) / (4 * np.pi) + 0j


def _bih2(r, s, k):
    x = r * r / (2 * s * s)
    lg = math.log(1 / (2 * s * s))
    c1 = s * s / (8 * np.pi) * (specfun.EULER_GAMMA + lg)
    c2 = (specfun.EULER_GAMMA / 2 + lg / 2 + 1) / (8 * np.pi)
    return -(s * s) / (8 * np.pi) * ((x + 1) * specfun.ein(x) - np.exp(-x)) + c2 * r * r + c1 + 0j


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _cumulative_radial(fn, radii):
    """``int_0^r fn(y) dy`` at sorted radii by Gauss-Legendre on each gap."""
    out = np.zeros(radii.shape)
    edges = np.concatenate([[0.0], radii])
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    y = mid[:, None] + half[:, None] * _GL_X[None, :]
    pieces = (fn(y) * _GL_W[None, :]).sum(axis=1) * half
    # first gap may contain a log singularity at y = 0
    if radii.size and radii[0] > 0:
        pieces[0] = integrate.quad(fn, 0.0, radii[0], epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    out[:] = np.cumsum(pieces)
    return out


def _helm2(r, s, k):
    """``(i/4) H0(k r)`` convolved with the 2D Gaussian.

    ``phi = (i / 4 s^2) [i Y0(kr) A(r) - i J0(kr) B(r) + J0(kr) C]`` with
    ``A = int_0^r J0(ky) w``, ``B = int_0^r Y0(ky) w``, ``w = y e^{-y^2/2s^2}``
    and ``C = int_0^inf H0(ky) w`` in closed form.
    """
    flat = r.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    cut = 12 * s  # beyond this the weight is below 1e-31
    inner = np.minimum(uniq, cut)
    inner_u, inner_inv = np.unique(inner, return_inverse=True)
    pos = inner_u > 0
    A = np.zeros(inner_u.shape)
    B = np.zeros(inner_u.shape)
    w = lambda y: y * np.exp(-y * y / (2 * s * s))  # noqa: E731
    A[pos] = _cumulative_radial(lambda y: special.j0(k * y) * w(y), inner_u[pos])
    with np.errstate(divide="ignore", invalid="ignore"):
        B[pos] = _cumulative_radial(
            lambda y: np.where(y > 0, special.y0(k * np.where(y > 0, y, 1)) * w(y), 0.0),
            inner_u[pos],
        )
    A, B = A[inner_inv], B[inner_inv]
    x = 0.5 * (k * s) ** 2
    C = s * s * math.exp(-x) + 1j * (s * s / np.pi) * math.exp(-x) * special.expi(x)
    ur = np.where(uniq > 0, uniq, 1.0)
    j0 = special.j0(k * ur)
    y0 = special.y0(k * ur)
    val = 0.25j / (s * s) * (1j * y0 * A - 1j * j0 * B + j0 * C)
    val = np.where(uniq > 0, val, 0.25j / (s * s) * C)
    return val[inv].reshape(r.shape)


def _untruncated(family, dim, k):
    from .kernels import KernelSpec, _untruncated as raw

    spec = KernelSpec(dim, family, k=k if family in ("helmholtz", "laplace_helmholtz") else 0.0)
    return lambda u: raw(spec, np.asarray(u, dtype=float))


class QuadratureError(RuntimeError):
    pass


def quadrature_convolution_oracle(family, dim, density, r, k=0.0, support=0.5, tol=1e-10):
    """``(g * rho)(x)`` at ``|x| = r`` by nested adaptive quadrature.

    Independent of the closed forms: the free-space kernel is averaged over
    the sphere (3D) or circle (2D) of radius ``t`` and integrated against
    the radial ``density(t)`` for ``0 <= t <= support``.
    """
    g = _untruncated(family, dim, k)
    r = float(r)
    err_total = 0.0

    def part(fn, a, b, points=None):
        nonlocal err_total
        re, e1 = integrate.quad(lambda t: np.real(fn(t)), a, b, epsabs=1e-14, epsrel=1e-12,
                                limit=400, points=points)
        im, e2 = integrate.quad(lambda t: np.imag(fn(t)), a, b, epsabs=1e-14, epsrel=1e-12,
                                limit=400, points=points)
        err_total += e1 + e2
        return re + 1j * im

    if dim == 3:
        # shell average of g: (1 / 2 r t) int_{|r-t|}^{r+t} g(u) u du
        def shell(t):
            if t == 0:
                return g(r) if r > 0 else 0.0
            if r == 0:
                return g(t)
            lo, hi = abs(r - t), r + t
            return part(lambda u: g(u) * u, lo, hi) / (2 * r * t)

        def radial(t):
            return 4 * np.pi * t * t * density(t) * shell(t)

    else:

        def ring(t):
            if t == 0 or r == 0:
                return 2 * np.pi * g(max(r, t)) if max(r, t) > 0 else 0.0
            fn = lambda th: g(np.sqrt(np.maximum(r * r + t * t - 2 * r * t * np.cos(th), 0.0)))  # noqa: E731
            return 2 * part(fn, 0.0, np.pi, points=[0.0] if abs(r - t) > 0 else None)

        def radial(t):
            return t * density(t) * ring(t)

    brk = [r] if 0 < r < support else None
    with np.errstate(divide="ignore", invalid="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val = part(radial, 0.0, support, points=brk)
    if err_total > max(tol, tol * abs(val)) * 10:
        raise QuadratureError(f"oracle error estimate {err_total:.2e} exceeds tolerance")
    return val


# ------------------------------------------------------------- contrasts

CONTRAST_KINDS = ("disk", "luneburg", "eaton", "cube", "custom-grid")
LENS_RADIUS = 0.45
EATON_NMAX = math.sqrt(3.0)


@dataclass(frozen=True)
class ContrastFunction:
    """Contrast ``q(x)`` of a scattering medium.

    ``path`` names a field file for the ``custom-grid`` kind.
    """

    kind: str
    radius: float = 0.25
    exponent: int = 8
    lens_radius: float = LENS_RADIUS
    path: str | None = None

    def __post_init__(self):
        if self.kind not in CONTRAST_KINDS:
            raise ValueError(f"unknown contrast kind {self.kind!r}")
        if self.kind == "custom-grid" and not self.path:
            raise ValueError("custom-grid contrast needs a path")


def eaton_index(r, lens_radius=LENS_RADIUS, nmax=EATON_NMAX, tol=1e-13):
    """Refractive index of the Eaton lens at radii ``r`` (clamped at ``nmax``).

    Solves ``n^2 = a/n + sqrt((a/n)^2 - 1)``, ``a = lens_radius / r``, by
    bisection on ``[1, min(a, nmax)]``. The residual
    ``n^2 - a/n - sqrt(...)`` increases with ``n``, so the bracket is safe.
    """
    r = np.asarray(r, dtype=float)
    n = np.ones(r.shape)
    inside = (r > 0) & (r < lens_radius)
    origin = r == 0
    a = lens_radius / r[inside]
    lo = np.ones(a.shape)
    hi = np.minimum(a, nmax)

    def f(x):
        return x * x - a / x - np.sqrt(np.maximum((a / x) ** 2 - 1, 0.0))

    clamp = f(hi) <= 0  # root beyond nmax
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        neg = f(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.all(hi - lo <= tol * hi):
            break
    else:
        raise RuntimeError("eaton root solve did not converge")
    root = np.where(clamp, nmax, 0.5 * (lo + hi))
    n[inside] = root
    n[origin] = nmax
    return n if n.ndim else n[()]


def contrast_eval(c: ContrastFunction, x) -> np.ndarray:
    """``q`` at points ``x`` of shape ``(..., dim)`` (not for ``custom-grid``)."""
    x = np.asarray(x, dtype=float)
    if c.kind == "custom-grid":
        raise ValueError("custom-grid contrasts are only defined on their grid; use contrast_on_grid")
    if c.kind == "cube":
        return np.exp(-0.5 * np.sum((x / c.radius) ** c.exponent, axis=-1))
    r = np.sqrt(np.sum(x * x, axis=-1))
    if c.kind == "disk":
        return np.exp(-0.5 * (r / c.radius) ** c.exponent)
    if c.kind == "luneburg":
        return np.where(r < c.lens_radius, 1 - (r / c.lens_radius) ** 2, 0.0)
    n = eaton_index(r, c.lens_radius)
    return n * n - 1


def contrast_on_grid(c: ContrastFunction, grid: GridSpec) -> np.ndarray:
    if c.kind == "custom-grid":
        q, _ = read_field(c.path)
        if q.shape != grid.shape:
            raise ValueError(f"contrast file has shape {q.shape}, grid needs {grid.shape}")
        return np.real_if_close(q)
    pts = np.stack(grid.mesh(), axis=-1)
    return contrast_eval(c, pts)


# -------------------------------------------------------- incident fields

BEAM_CENTER = (-0.01 - 0.5j, 0.77)


@dataclass(frozen=True)
class IncidentField:
    """Incoming wave: ``plane_wave`` along ``direction`` or the complex-source ``gaussian_beam``."""

    kind: str
    k: float
    direction: tuple = (1.0, 0.0, 0.0)
    center: tuple = BEAM_CENTER

    def __post_init__(self):
        if self.kind not in ("plane_wave", "gaussian_beam"):
            raise ValueError(f"unknown incident field {self.kind!r}")
        if not self.k > 0:
            raise ValueError("k must be positive")


def incident_eval(f: IncidentField, x) -> np.ndarray:
    """Incident field at points ``x`` of shape ``(..., dim)``.

    The beam is ``conj(H0(k R)) e^{-k/2}`` with the complex distance
    ``R = sqrt((x - x_c)^2 + (y - y_c)^2)`` on the principal branch. Points
    on the branch segment of ``R`` are rejected.
    """
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    if f.kind == "plane_wave":
        d = np.asarray(f.direction[:dim], dtype=float)
        d = d / np.linalg.norm(d)
        return np.exp(1j * f.k * (x @ d))
    if dim != 2:
        raise ValueError("gaussian_beam is two-dimensional")
    xc, yc = f.center
    R2 = (x[..., 0] - xc) ** 2 + (x[..., 1] - yc) ** 2
    on_cut = (np.abs(R2.imag) < 1e-12) & (R2.real <= 0)
    if np.any(on_cut):
        raise ValueError("evaluation point on the branch cut of the complex-source beam")
    R = np.sqrt(R2)
    return np.conj(specfun.hankel1_0(f.k * R)) * math.exp(-0.5 * f.k)


# ------------------------------------------------------------- dielectric


@dataclass
class AtomSet:
    """Atoms of a synthetic molecule and the dielectric constants."""

    centers: np.ndarray
    radii: np.ndarray
    mu2: float = 2.0
    eps_in: float = 2.0
    eps_out: float = 80.0
    charges: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.broadcast_to(np.asarray(self.radii, dtype=float), (len(self.centers),)).copy()
        if np.any(self.radii <= 0) or self.mu2 <= 0 or self.eps_in <= 0 or self.eps_out <= 0:
            raise ValueError("radii, mu2 and dielectric constants must be positive")

    @classmethod
    def synthetic(cls, count=20, seed=0, ball=0.35, radius=0.022, **kw) -> "AtomSet":
        """Pseudo-random atoms, uniform in a ball of radius ``ball``."""
        rng = np.random.default_rng(seed)
        d = rng.standard_normal((count, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        rad = ball * rng.random(count) ** (1 / 3)
        charges = rng.choice([-1.0, 1.0], size=count)
        return cls(d * rad[:, None], radius, charges=charges, **kw)


def dielectric_eval(a: AtomSet, x):
    """``eps(x)`` and its gradient at points ``x`` of shape ``(..., 3)``.

    ``q = 1 - prod_i (1 - alpha_i)`` with ``alpha_i = exp(-r_i^2 / (mu^2 R_i^2))``
    and ``eps = q eps_in + (1 - q) eps_out``.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 3)
    prod = np.ones(len(pts))
    # d(prod)/dx = prod * sum_i (-d alpha_i) / (1 - alpha_i); accumulate
    # without dividing so alpha_i = 1 at a center is harmless
    grad = np.zeros((len(pts), 3))
    for c, R in zip(a.centers, a.radii):
        diff = pts - c
        alpha = np.exp(-np.sum(diff * diff, axis=1) / (a.mu2 * R * R))
        dalpha = alpha[:, None] * (-2 * diff / (a.mu2 * R * R))
        grad = grad * (1 - alpha)[:, None] - prod[:, None] * dalpha
        prod = prod * (1 - alpha)
    q = 1 - prod
    eps = q * a.eps_in + (1 - q) * a.eps_out
    geps = -grad * (a.eps_in - a.eps_out)
    return eps.reshape(shape), geps.reshape(shape + (3,))

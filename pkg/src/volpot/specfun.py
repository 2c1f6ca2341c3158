"""Special functions used by the kernel transforms and the analytic solutions.

Thin, vectorized wrappers around :mod:`scipy.special` that add the domain
checks the rest of the package relies on, plus the regularized exponential
integral ``Ein`` which scipy does not provide directly.

All functions accept scalars or arrays and return numpy values.
"""

from __future__ import annotations

import numpy as np
from scipy import special

EULER_GAMMA = float(np.euler_gamma)

#: Largest ``|Im z|`` for which :func:`erf_complex` is considered reliable.
ERF_IMAG_LIMIT = 30.0

# Below this argument Ein is summed from its power series; above it the
# E1-based form has no cancellation to speak of.
_EIN_SERIES_CUTOFF = 1.0
_EIN_SERIES_TERMS = 30


def bessel_j0(x):
    """Bessel function of the first kind of order zero."""
    return special.j0(x)


def bessel_j1(x):
    """Bessel function of the first kind of order one."""
    return special.j1(x)


def bessel_y0(x):
    x = np.asarray(x, dtype=float)
    _require_positive(x, "bessel_y0")
    return special.y0(x)


def bessel_y1(x):
    x = np.asarray(x, dtype=float)
    _require_positive(x, "bessel_y1")
    return special.y1(x)


def hankel1_0(x):
    """Hankel function ``H_0^(1)(x) = J_0(x) + i Y_0(x)``.

    Real arguments must be strictly positive (logarithmic singularity at
    the origin). Complex arguments are accepted and evaluated on the
    principal branch; this is what the complex-source beam uses.
    """
    x = np.asarray(x)
    if not np.iscomplexobj(x):
        _require_positive(x, "hankel1_0")
    return special.hankel1(0, x)


def hankel1_1(x):
    """Hankel function ``H_1^(1)(x) = J_1(x) + i Y_1(x)``."""
    x = np.asarray(x)
    if not np.iscomplexobj(x):
        _require_positive(x, "hankel1_1")
    return special.hankel1(1, x)


def erf_complex(z):
    """Error function of a complex argument.

    Raises
    ------
    ValueError
        If any ``|Im z|`` exceeds :data:`ERF_IMAG_LIMIT`.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z.imag) > ERF_IMAG_LIMIT):
        raise ValueError(
            f"erf_complex: |Im z| > {ERF_IMAG_LIMIT} is outside the supported region"
        )
    return special.erf(z)


def erfi(x):
    """Imaginary error function ``-i erf(i x)`` for real ``x``."""
    return special.erfi(x)


def expint_ei(x):
    """Exponential integral ``Ei(x)`` (principal value) for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    _require_positive(x, "expint_ei")
    return special.expi(x)


def expint_e1(x):
    """Exponential integral ``E1(x) = int_x^inf e^-t / t dt`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    _require_positive(x, "expint_e1")
    return special.exp1(x)


def ein(x):
    """Entire exponential integral ``Ein(x) = E1(x) + log(x) + gamma``.

    Equal to ``sum_{n>=1} (-1)**(n+1) x**n / (n n!)``, so ``Ein(0) = 0``.
    This is the regularized integral appearing in the 2D Gaussian
    biharmonic potential. Defined for ``x >= 0``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("ein: argument must be finite and >= 0")
    out = np.empty_like(x)
    small = x < _EIN_SERIES_CUTOFF
    xs = x[small]
    # Horner on sum_{n=1}^{N} c_n x^n with c_n = (-1)^(n+1)/(n n!)
    acc = np.zeros_like(xs)
    for n in range(_EIN_SERIES_TERMS, 0, -1):
        acc = (acc + (-1) ** (n + 1) / (n * special.factorial(n))) * xs
    out[small] = acc
    xl = x[~small]
    out[~small] = special.exp1(xl) + np.log(xl) + EULER_GAMMA
    return out if out.ndim else out[()]


def _require_positive(x, name):
    if np.any(~(x > 0)):
        raise ValueError(f"{name}: argument must be > 0")

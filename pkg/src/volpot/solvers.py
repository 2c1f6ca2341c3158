"""Second-kind integral equations on the FFT potential, and Krylov solvers.

Scattering
    ``-sigma + k^2 q (G_k * sigma) = -k^2 q phi_in`` with the scattered
    field ``phi_sc = G_k * sigma``. In 2D the kernel is ``(i/4) H0(k r)``
    by default, the Green's function of ``Delta + k^2``, for which the
    equation is equivalent to the Helmholtz problem for ``phi_sc``.
    ``normalization="hankel"`` puts ``H0(k r)`` itself (``-4i`` times larger)
    in both the equation and the field. That is a different equation with a
    different scattered field; it is kept for comparison.

Dielectric (Poisson-Boltzmann at zero ionic strength)
    ``-eps sigma + grad(eps) . grad(g0 * sigma) = rho`` with
    ``g0 = 1 / (4 pi r)``; the potential is ``phi = g0 * sigma``. Solves use
    the equation divided by ``eps`` (see :class:`PBSystem`).

Both Krylov drivers start from ``x = 0``, measure the residual relative to
``||b||``, and re-check the final residual with one extra operator
application. That extra product is reported as ``n_verify``, separately
from ``n_matvec``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .grid import GridSpec
from .kernels import KernelSpec
from .potential import (
    ConvolutionTable,
    SpectralMultiplier,
    convolve_precomputed,
    evaluate_at,
    precompute_gradient_tables,
    precompute_table,
)

BREAKDOWN = 1e-290
CSV_COLUMNS = ("Size", "N_tot", "N", "E2", "Einf", "N_matvec", "N_iter", "T_solve", "T_precomp")


class NumericalFailure(RuntimeError):
    """A solve did not converge; ``report`` and ``x`` carry the best iterate."""

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


@dataclass
class LinearOperator:
    """Matrix-free operator on the samples of a fixed grid."""

    apply: callable
    grid: GridSpec
    label: str = ""
    dtype: type = complex

    def __call__(self, x):
        x = np.asarray(x)
        if x.shape != self.grid.shape:
            raise ValueError(f"operator {self.label!r} expects shape {self.grid.shape}, got {x.shape}")
        return self.apply(x)


@dataclass
class SolverConfig:
    method: str = "bicgstab"
    tol: float = 1e-12
    max_matvec: int = 1000
    restart: int = 200

    def __post_init__(self):
        if self.method not in ("gmres", "bicgstab"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_matvec < 1 or self.restart < 1:
            raise ValueError("max_matvec and restart must be >= 1")


@dataclass
class SolveReport:
    method: str
    n_matvec: int = 0
    n_iter: int = 0
    n_verify: int = 0
    achieved_residual: float = math.nan
    converged: bool = False
    restarts: int = 0
    t_solve: float = 0.0
    t_precomp: float = 0.0
    history: list = field(default_factory=list)
    message: str = ""

    def as_text(self) -> str:
        """Plain ``key = value`` block."""
        keys = ("method", "converged", "n_matvec", "n_iter", "n_verify", "restarts",
                "achieved_residual", "t_solve", "t_precomp", "message")
        return "".join(f"{k} = {getattr(self, k)}\n" for k in keys)


def table_row(report: SolveReport, size, grid: GridSpec, e2=math.nan, einf=math.nan) -> dict:
    """Row with the columns of :data:`CSV_COLUMNS`."""
    return {
        "Size": size,
        "N_tot": grid.n**grid.dim,
        "N": grid.n,
        "E2": f"{e2:.3e}",
        "Einf": f"{einf:.3e}",
        "N_matvec": report.n_matvec,
        "N_iter": report.n_iter,
        "T_solve": f"{report.t_solve:.3f}",
        "T_precomp": f"{report.t_precomp:.3f}",
    }


def _norm(x):
    return float(np.linalg.norm(x.ravel()))


def _vdot(a, b):
    return np.vdot(a.ravel(), b.ravel())


def _finish(op, b, x, rep, bnorm, tol):
    r = b - op(x)
    rep.n_verify += 1
    rep.achieved_residual = _norm(r) / bnorm
    rep.converged = rep.achieved_residual <= tol
    return r


# ------------------------------------------------------------------ GMRES


def gmres(op: LinearOperator, rhs, cfg: SolverConfig | None = None):
    """Restarted GMRES with modified Gram-Schmidt and one reorthogonalization.

    Returns ``(x, report)``. On failure ``report.converged`` is False and
    ``x`` is the best iterate found.
    """
    cfg = cfg or SolverConfig(method="gmres")
    b = np.asarray(rhs, dtype=complex)
    rep = SolveReport("gmres")
    t0 = time.perf_counter()
    x = np.zeros_like(b)
    bnorm = _norm(b)
    if bnorm == 0:
        rep.achieved_residual, rep.converged = 0.0, True
        return x, rep
    r = b.copy()
    best = (1.0, x.copy())
    while True:
        beta = _norm(r)
        m = min(cfg.restart, cfg.max_matvec - rep.n_matvec)
        if m <= 0:
            break
        V = [r / beta]
        H = np.zeros((m + 1, m), dtype=complex)
        cs = np.zeros(m, dtype=complex)
        sn = np.zeros(m, dtype=complex)
        g = np.zeros(m + 1, dtype=complex)
        g[0] = beta
        j_done = 0
        for j in range(m):
            w = op(V[j])
            rep.n_matvec += 1
            rep.n_iter += 1
            for _ in range(2):  # MGS plus one reorthogonalization pass
                for i in range(j + 1):
                    c = _vdot(V[i], w)
                    H[i, j] += c
                    w = w - c * V[i]
            H[j + 1, j] = _norm(w)
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            a, bb = H[j, j], H[j + 1, j]
            den = math.hypot(abs(a), abs(bb))
            if den == 0:
                cs[j], sn[j] = 1.0, 0.0
            elif a == 0:
                cs[j], sn[j] = 0.0, 1.0
            else:
                cs[j] = abs(a) / den
                sn[j] = (a / abs(a)) * np.conj(bb) / den
            H[j, j] = cs[j] * a + sn[j] * bb
            H[j + 1, j] = 0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            res = abs(g[j + 1]) / bnorm
            rep.history.append(res)
            j_done = j + 1
            if res <= cfg.tol or H[j, j] == 0:
                break
            if _norm(w) == 0:
                break
            V.append(w / _norm(w))
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), g[:j_done]) if j_done else []
        for i in range(j_done):
            x = x + y[i] * V[i]
        r = _finish(op, b, x, rep, bnorm, cfg.tol)
        if rep.achieved_residual < best[0]:
            best = (rep.achieved_residual, x.copy())
        if rep.converged or rep.n_matvec >= cfg.max_matvec:
            break
        rep.restarts += 1
    if not rep.converged:
        rep.achieved_residual, x = best
        rep.message = "max_matvec reached before tolerance"
    rep.t_solve = time.perf_counter() - t0
    return x, rep


# --------------------------------------------------------------- Bi-CGStab


def bicgstab(op: LinearOperator, rhs, cfg: SolverConfig | None = None):
    """Bi-CGStab with a half-step convergence exit.

    Each full iteration costs two products. The iteration stops as soon as
    the intermediate residual ``s`` meets the tolerance, so ``n_matvec`` is
    ``2 n_iter`` or ``2 n_iter - 1``. On breakdown the method restarts once
    from the current iterate. If the recurrence residual has drifted from
    the true one, the method also restarts, up to ``max_matvec``.
    """
    cfg = cfg or SolverConfig(method="bicgstab")
    b = np.asarray(rhs, dtype=complex)
    rep = SolveReport("bicgstab")
    t0 = time.perf_counter()
    x = np.zeros_like(b)
    bnorm = _norm(b)
    if bnorm == 0:
        rep.achieved_residual, rep.converged = 0.0, True
        return x, rep
    r = b.copy()
    breakdowns = 0
    best = (1.0, x.copy())
    while rep.n_matvec < cfg.max_matvec:
        rhat = r.copy()
        rho_prev = alpha = omega = 1.0 + 0j
        v = np.zeros_like(b)
        p = np.zeros_like(b)
        broke = False
        done = False
        while rep.n_matvec < cfg.max_matvec:
            rho = _vdot(rhat, r)
            if abs(rho) < BREAKDOWN:
                broke = True
                break
            beta = (rho / rho_prev) * (alpha / omega)
            p = r + beta * (p - omega * v)
            v = op(p)
            rep.n_matvec += 1
            rep.n_iter += 1
            den = _vdot(rhat, v)
            if abs(den) < BREAKDOWN:
                broke = True
                break
            alpha = rho / den
            s = r - alpha * v
            res = _norm(s) / bnorm
            rep.history.append(res)
            if res <= cfg.tol:
                x = x + alpha * p
                done = True
                break
            if rep.n_matvec >= cfg.max_matvec:
                x = x + alpha * p
                break
            t = op(s)
            rep.n_matvec += 1
            tt = _vdot(t, t).real
            omega = _vdot(t, s) / tt if tt > 0 else 0.0
            x = x + alpha * p + omega * s
            r = s - omega * t
            res = _norm(r) / bnorm
            rep.history.append(res)
            if res <= cfg.tol:
                done = True
                break
            if abs(omega) < BREAKDOWN:
                broke = True
                break
            rho_prev = rho
        r = _finish(op, b, x, rep, bnorm, cfg.tol)
        if rep.achieved_residual < best[0]:
            best = (rep.achieved_residual, x.copy())
        if rep.converged:
            break
        if broke:
            breakdowns += 1
            if breakdowns > 1:
                rep.message = "breakdown after restart"
                break
        elif not done:
            break
        rep.restarts += 1
    if not rep.converged:
        rep.achieved_residual, x = best
        rep.message = rep.message or "max_matvec reached before tolerance"
    rep.t_solve = time.perf_counter() - t0
    return x, rep


def solve(op, rhs, cfg: SolverConfig):
    return (gmres if cfg.method == "gmres" else bicgstab)(op, rhs, cfg)


# ------------------------------------------------------------- scattering

LS_NORMALIZATIONS = ("green", "hankel")


def ls_kernel_scale(dim: int, normalization: str = "green") -> complex:
    """Factor from the Green's function to the kernel in the equation.

    2D ``hankel``: ``H0 = -4i (i/4 H0)``. Everything else uses the Green's
    function itself.
    """
    if normalization not in LS_NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {LS_NORMALIZATIONS}")
    return -4j if (dim == 2 and normalization == "hankel") else 1.0


def ls_table(kspec: KernelSpec, grid: GridSpec) -> ConvolutionTable:
    if kspec.family != "helmholtz":
        raise ValueError("scattering needs a helmholtz kernel")
    return precompute_table(SpectralMultiplier(kspec, grid), label="ls")


def ls_operator(kspec: KernelSpec, q, table: ConvolutionTable | None = None,
                normalization: str = "green") -> LinearOperator:
    """``sigma -> -sigma + k^2 q (c G_k * sigma)`` on the grid of ``q``."""
    q = np.asarray(q)
    grid = table.grid if table is not None else GridSpec(kspec.dim, q.shape[0])
    if q.shape != grid.shape:
        raise ValueError(f"contrast shape {q.shape} does not match grid {grid.shape}")
    if kspec.dim != grid.dim:
        raise ValueError("kernel and grid dimensions differ")
    if table is None:
        table = ls_table(kspec, grid)
    elif table.kspec is not None and table.kspec != kspec:
        raise ValueError("table was built for a different kernel")
    coef = kspec.k**2 * ls_kernel_scale(grid.dim, normalization) * q
    op = LinearOperator(lambda s: -s + coef * convolve_precomputed(table, s), grid,
                        label=f"ls[{normalization}]")
    op.table = table
    op.scale = ls_kernel_scale(grid.dim, normalization)
    return op


def ls_rhs(kspec: KernelSpec, q, inc: analytic.IncidentField, grid: GridSpec):
    """``-k^2 q phi_in`` on the grid."""
    pts = np.stack(grid.mesh(), axis=-1)
    return -kspec.k**2 * np.asarray(q) * analytic.incident_eval(inc, pts)


@dataclass
class ScatterResult:
    sigma: np.ndarray
    scattered: np.ndarray
    incident: np.ndarray
    report: SolveReport
    grid: GridSpec
    operator: LinearOperator

    @property
    def total(self):
        return self.incident + self.scattered


def scatter_solve(grid: GridSpec, k: float, q, inc: analytic.IncidentField,
                  cfg: SolverConfig | None = None, normalization: str = "green",
                  L: float | None = None) -> ScatterResult:
    """Solve the scattering equation and reconstruct the scattered field."""
    cfg = cfg or SolverConfig()
    kspec = KernelSpec(grid.dim, "helmholtz", k=k, L=L)
    t0 = time.perf_counter()
    table = ls_table(kspec, grid)
    t_pre = time.perf_counter() - t0
    op = ls_operator(kspec, q, table, normalization)
    pts = np.stack(grid.mesh(), axis=-1)
    phi_in = analytic.incident_eval(inc, pts)
    del pts
    rhs = -k**2 * np.asarray(q) * phi_in
    sigma, rep = solve(op, rhs, cfg)
    rep.t_precomp = t_pre
    scat = op.scale * convolve_precomputed(table, sigma)
    return ScatterResult(sigma, scat, phi_in, rep, grid, op)


# ------------------------------------------------------------- dielectric


@dataclass
class PBSystem:
    """Dielectric operator with its coefficient fields and tables.

    ``operator`` is the equation as written, ``-eps sigma + ...``.
    ``scaled_operator`` is the same equation divided by ``eps``,
    ``-sigma + grad(log eps) . grad(g0 * sigma)``, which is identity plus a
    smoother operator and needs far fewer Krylov iterations.
    """

    operator: LinearOperator
    eps: np.ndarray
    grad_eps: np.ndarray
    table: ConvolutionTable
    gradient_tables: list
    t_precomp: float

    @property
    def scaled_operator(self) -> LinearOperator:
        op, eps = self.operator, self.eps
        return LinearOperator(lambda s: op(s) / eps, op.grid, label="pb/eps")

    def potential(self, sigma):
        """``phi = g0 * sigma``."""
        return convolve_precomputed(self.table, sigma)

    def solve(self, rho, cfg: SolverConfig | None = None, scaled: bool = True):
        """Solve for ``sigma``; the report's residual refers to the unscaled equation."""
        cfg = cfg or SolverConfig(method="gmres")
        rho = np.asarray(rho, dtype=complex)
        if scaled:
            x, rep = solve(self.scaled_operator, rho / self.eps, cfg)
            bn = _norm(rho)
            rep.n_verify += 1
            rep.achieved_residual = _norm(self.operator(x) - rho) / bn if bn else 0.0
        else:
            x, rep = solve(self.operator, rho, cfg)
        rep.t_precomp = self.t_precomp
        return x, rep


def pb_operator(grid: GridSpec, atoms: analytic.AtomSet, L: float | None = None) -> PBSystem:
    """``sigma -> -eps sigma + sum_a (d_a eps) (d_a g0 * sigma)``."""
    if grid.dim != 3:
        raise ValueError("the dielectric problem is three-dimensional")
    t0 = time.perf_counter()
    mult = SpectralMultiplier(KernelSpec(3, "laplace", L=L), grid)
    gtabs = precompute_gradient_tables(mult)
    table = precompute_table(mult, label="g0")
    del mult
    t_pre = time.perf_counter() - t0
    eps, geps = analytic.dielectric_eval(atoms, np.stack(grid.mesh(), axis=-1))
    geps = np.moveaxis(geps, -1, 0)
    active = [a for a in range(3) if np.any(geps[a] != 0)]

    def apply(s):
        out = -eps * s
        for a in active:
            out = out + geps[a] * convolve_precomputed(gtabs[a], s)
        return out

    op = LinearOperator(apply, grid, label="pb")
    return PBSystem(op, eps, geps, table, gtabs, t_pre)


def pb_charge_density(grid: GridSpec, atoms: analytic.AtomSet, width: float = 0.03):
    """Gaussian blobs of the atom charges (unit charge when none are set)."""
    pts = np.stack(grid.mesh(), axis=-1)
    q = atoms.charges if atoms.charges is not None else np.ones(len(atoms.centers))
    rho = np.zeros(grid.shape)
    src = analytic.GaussianSource(width, 3)
    for c, z in zip(atoms.centers, q):
        rho += z * src.density(np.sqrt(np.sum((pts - c) ** 2, axis=-1)))
    return rho


def manufactured_density(grid: GridSpec, seed: int = 0, count: int = 4, width: float = 0.08):
    """Smooth pseudo-random test density: a few Gaussian bumps inside radius 0.3."""
    rng = np.random.default_rng(seed)
    pts = np.stack(grid.mesh(), axis=-1)
    out = np.zeros(grid.shape, dtype=complex)
    for _ in range(count):
        c = rng.uniform(-0.3, 0.3, size=grid.dim)
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        out += amp * np.exp(-np.sum((pts - c) ** 2, axis=-1) / (2 * width**2))
    return out


def relative_errors(u, ref):
    """``(E2, Einf)`` of ``u`` against ``ref``."""
    d = np.abs(np.asarray(u) - np.asarray(ref)).ravel()
    a = np.abs(np.asarray(ref)).ravel()
    return float(np.linalg.norm(d) / np.linalg.norm(a)), float(d.max() / a.max())


def field_on_grid(result: ScatterResult, target: GridSpec) -> np.ndarray:
    """Scattered field of a solve evaluated at the nodes of another grid.

    Uses the trapezoidal quadrature of the solve's own grid, so it is the
    same discretization as ``result.scattered`` evaluated off the nodes.
    """
    kspec = result.operator.table.kspec
    mult = SpectralMultiplier(kspec, result.grid)
    x = target.coords()
    return result.operator.scale * evaluate_at(mult, result.sigma, [x] * target.dim)


def self_convergence_errors(result: ScatterResult, reference: ScatterResult):
    """``(E2, Einf)`` of the scattered field over the reference grid nodes."""
    u = field_on_grid(result, reference.grid)
    return relative_errors(u, reference.scattered)

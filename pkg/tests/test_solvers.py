import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from volpot import analytic as A
from volpot import potential as P
from volpot import solvers as S
from volpot.grid import GridSpec
from volpot.kernels import KernelSpec


def dense_operator(M, grid):
    return S.LinearOperator(lambda x: (M @ x.ravel()).reshape(grid.shape), grid, label="dense")


def random_system(seed, n=4, shift=3.0):
    # (n x n) grid treated as a vector of length n^2
    g = GridSpec(2, n)
    rng = np.random.default_rng(seed)
    N = n * n
    M = shift * np.eye(N) + (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / math.sqrt(N)
    b = (rng.standard_normal(N) + 1j * rng.standard_normal(N)).reshape(g.shape)
    return g, M, b


@pytest.mark.parametrize("solver", [S.gmres, S.bicgstab])
def test_identity_converges_in_one_product(solver):
    g = GridSpec(2, 8)
    b = np.random.default_rng(0).standard_normal(g.shape) + 0j
    x, rep = solver(S.LinearOperator(lambda v: v, g), b)
    assert rep.converged and np.allclose(x, b)
    assert rep.n_matvec == 1 and rep.n_iter == 1
    assert rep.n_verify == 1


@pytest.mark.parametrize("solver", [S.gmres, S.bicgstab])
def test_zero_rhs_needs_no_products(solver):
    g = GridSpec(2, 8)
    x, rep = solver(S.LinearOperator(lambda v: 2 * v, g), np.zeros(g.shape))
    assert rep.converged and rep.n_matvec == 0 and np.all(x == 0)


@given(st.integers(0, 10_000))
def test_gmres_and_bicgstab_solve_dense_systems(seed):
    g, M, b = random_system(seed)
    ref = np.linalg.solve(M, b.ravel()).reshape(g.shape)
    cfg = S.SolverConfig(tol=1e-11, max_matvec=400)
    for method in ("gmres", "bicgstab"):
        cfg.method = method
        x, rep = S.solve(dense_operator(M, g), b, cfg)
        assert rep.converged, rep.message
        assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)
        assert rep.achieved_residual == pytest.approx(
            np.linalg.norm(b - (M @ x.ravel()).reshape(g.shape)) / np.linalg.norm(b), rel=1e-6, abs=1e-15)


def test_gmres_residual_history_is_monotone():
    g, M, b = random_system(7, shift=1.0)
    _, rep = S.gmres(dense_operator(M, g), b, S.SolverConfig("gmres", tol=1e-12, restart=100))
    h = np.array(rep.history)
    assert np.all(np.diff(h) <= 1e-12)
    assert rep.n_matvec == rep.n_iter <= 16


def test_gmres_restart_still_converges():
    g, M, b = random_system(3, n=6, shift=2.0)
    _, rep = S.gmres(dense_operator(M, g), b, S.SolverConfig("gmres", tol=1e-10, restart=5, max_matvec=500))
    assert rep.converged and rep.restarts >= 1


def test_bicgstab_product_count_bookkeeping():
    for seed in range(6):
        g, M, b = random_system(seed, n=6, shift=2.0)
        _, rep = S.bicgstab(dense_operator(M, g), b, S.SolverConfig(tol=1e-10))
        assert rep.converged
        assert rep.n_matvec in (2 * rep.n_iter - 1, 2 * rep.n_iter)
        assert rep.n_verify >= 1


def test_nonconvergence_reports_best_iterate():
    g, M, b = random_system(1, n=6, shift=0.0)
    x, rep = S.gmres(dense_operator(M, g), b, S.SolverConfig("gmres", tol=1e-14, max_matvec=3))
    assert not rep.converged and rep.message
    assert rep.n_matvec <= 3
    assert rep.achieved_residual == pytest.approx(
        np.linalg.norm(b - (M @ x.ravel()).reshape(g.shape)) / np.linalg.norm(b), rel=1e-10)


def test_solver_config_and_operator_validation():
    with pytest.raises(ValueError):
        S.SolverConfig(method="cg")
    with pytest.raises(ValueError):
        S.SolverConfig(tol=0)
    op = S.LinearOperator(lambda v: v, GridSpec(2, 8))
    with pytest.raises(ValueError):
        op(np.zeros((4, 4)))


def test_report_text_and_table_row():
    rep = S.SolveReport("gmres", n_matvec=5, n_iter=5, achieved_residual=1e-13, converged=True)
    assert "n_matvec = 5" in rep.as_text()
    row = S.table_row(rep, 10, GridSpec(2, 64), 1e-3, 2e-3)
    assert tuple(row) == S.CSV_COLUMNS
    assert row["N_tot"] == 64 * 64 and row["E2"] == "1.000e-03"


# ------------------------------------------------------------- scattering


@pytest.fixture(scope="module")
def ls2d():
    g = GridSpec(2, 32)
    kspec = KernelSpec(2, "helmholtz", k=2 * math.pi * 2)
    return g, kspec, S.ls_table(kspec, g)


def test_ls_with_zero_contrast_is_minus_identity(ls2d):
    g, kspec, tab = ls2d
    op = S.ls_operator(kspec, np.zeros(g.shape), tab)
    x = np.random.default_rng(0).standard_normal(g.shape) + 0j
    assert np.array_equal(op(x), -x)


def test_ls_operator_is_linear(ls2d):
    g, kspec, tab = ls2d
    q = A.contrast_on_grid(A.ContrastFunction("disk"), g)
    op = S.ls_operator(kspec, q, tab)
    rng = np.random.default_rng(2)
    x, y = (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape) for _ in range(2))
    a = 0.3 - 1.7j
    assert np.allclose(op(a * x + y), a * op(x) + op(y), rtol=1e-12, atol=1e-12)


def test_ls_operator_column_matches_nystrom_entries(ls2d):
    g, kspec, tab = ls2d
    q = A.contrast_on_grid(A.ContrastFunction("disk"), g)
    op = S.ls_operator(kspec, q, tab)
    i0 = (11, 20)
    e = np.zeros(g.shape, dtype=complex)
    e[i0] = 1
    col = op(e)
    for i in [(11, 20), (14, 18), (3, 30), (16, 16)]:
        off = (i[0] - i0[0], i[1] - i0[1])
        expect = -(i == i0) + kspec.k**2 * q[i] * P.nystrom_entry(tab, off)
        assert col[i] == pytest.approx(expect, rel=1e-10, abs=1e-13)


def test_hankel_normalization_scales_the_kernel(ls2d):
    g, kspec, tab = ls2d
    assert S.ls_kernel_scale(2, "hankel") == -4j
    assert S.ls_kernel_scale(3, "hankel") == 1.0
    q = A.contrast_on_grid(A.ContrastFunction("disk"), g)
    x = np.random.default_rng(4).standard_normal(g.shape) + 0j
    green = S.ls_operator(kspec, q, tab, "green")(x) + x
    hank = S.ls_operator(kspec, q, tab, "hankel")(x) + x
    assert np.allclose(hank, -4j * green, rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError):
        S.ls_kernel_scale(2, "other")


def test_ls_operator_rejects_mismatched_inputs(ls2d):
    g, kspec, tab = ls2d
    with pytest.raises(ValueError):
        S.ls_operator(kspec, np.zeros((16, 16)), tab)
    with pytest.raises(ValueError):
        S.ls_table(KernelSpec(2, "laplace"), g)


def test_scatter_solution_satisfies_the_equation(ls2d):
    g, kspec, _ = ls2d
    q = A.contrast_on_grid(A.ContrastFunction("disk"), g)
    inc = A.IncidentField("plane_wave", kspec.k)
    res = S.scatter_solve(g, kspec.k, q, inc, S.SolverConfig(tol=1e-12))
    assert res.report.converged
    rhs = S.ls_rhs(kspec, q, inc, g)
    resid = np.linalg.norm(res.operator(res.sigma) - rhs) / np.linalg.norm(rhs)
    assert resid == pytest.approx(res.report.achieved_residual, rel=1e-6, abs=1e-15)
    # -sigma + k^2 q u = -k^2 q phi_in, so sigma = k^2 q (u + phi_in)
    assert np.allclose(res.sigma, kspec.k**2 * q * res.total, atol=1e-9 * np.abs(res.sigma).max())


def test_field_on_own_grid_equals_scattered(ls2d):
    g, kspec, _ = ls2d
    q = A.contrast_on_grid(A.ContrastFunction("disk"), g)
    res = S.scatter_solve(g, kspec.k, q, A.IncidentField("plane_wave", kspec.k))
    assert np.allclose(S.field_on_grid(res, g), res.scattered, rtol=1e-10, atol=1e-12)
    e2, einf = S.self_convergence_errors(res, res)
    assert e2 < 1e-10 and einf < 1e-10


def test_relative_errors():
    ref = np.array([1.0, -2.0, 2.0])
    e2, einf = S.relative_errors(ref + np.array([0.0, 0.3, 0.0]), ref)
    assert e2 == pytest.approx(0.1)
    assert einf == pytest.approx(0.15)


# ------------------------------------------------------------- dielectric


@pytest.fixture(scope="module")
def pb16():
    g = GridSpec(3, 16)
    atoms = A.AtomSet.synthetic(count=5, seed=2, radius=0.06)
    return g, atoms, S.pb_operator(g, atoms)


def test_pb_constant_dielectric_is_scaled_identity():
    g = GridSpec(3, 16)
    far = A.AtomSet([[5.0, 5.0, 5.0]], 0.01)  # no atom near the box
    system = S.pb_operator(g, far)
    x = np.random.default_rng(0).standard_normal(g.shape) + 0j
    assert np.allclose(system.operator(x), -far.eps_out * x, rtol=1e-12)


def test_pb_scaled_and_unscaled_solves_agree(pb16):
    g, atoms, system = pb16
    rho = S.manufactured_density(g, seed=1)
    cfg = S.SolverConfig("gmres", tol=1e-11)
    xs, rs = system.solve(rho, cfg, scaled=True)
    xu, ru = system.solve(rho, cfg, scaled=False)
    assert rs.converged and ru.converged
    assert rs.n_iter <= ru.n_iter
    assert np.linalg.norm(xs - xu) <= 1e-8 * np.linalg.norm(xu)
    recomputed = np.linalg.norm(system.operator(xs) - rho) / np.linalg.norm(rho)
    assert rs.achieved_residual == pytest.approx(recomputed, rel=1e-12)


def test_pb_requires_three_dimensions():
    with pytest.raises(ValueError):
        S.pb_operator(GridSpec(2, 16), A.AtomSet.synthetic(count=2))


def test_pb_charge_density_total_charge():
    g = GridSpec(3, 64)
    atoms = A.AtomSet.synthetic(count=6, seed=0)
    rho = S.pb_charge_density(g, atoms)
    assert rho.sum() * g.h**3 == pytest.approx(atoms.charges.sum(), abs=1e-6)

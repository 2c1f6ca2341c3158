import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from volpot import analytic as A
from volpot.grid import GridSpec, write_field


@pytest.mark.parametrize("dim,family", A.GAUSSIAN_PAIRS)
@pytest.mark.parametrize("r", [0.0, 0.03, 0.17, 0.4])
def test_gaussian_closed_forms_match_quadrature(dim, family, r):
    sigma, k = 0.05, 12.0
    src = A.GaussianSource(sigma, dim)
    exact = A.gaussian_exact(family, dim, sigma, r, k)
    ref = A.quadrature_convolution_oracle(family, dim, src.density, r, k, support=12 * sigma)
    assert abs(exact - ref) <= 1e-8 * max(1.0, abs(ref))


def test_gaussian_laplace_far_field_is_point_charge():
    r, s = 0.45, 0.02
    assert A.gaussian_exact("laplace", 3, s, r) == pytest.approx(1 / (4 * math.pi * r), rel=1e-12)
    assert A.gaussian_exact("laplace", 2, s, r) == pytest.approx(
        -math.log(r) / (2 * math.pi), rel=1e-6)


def test_gaussian_origin_values_are_finite_and_continuous():
    for dim, fam in A.GAUSSIAN_PAIRS:
        v0 = A.gaussian_exact(fam, dim, 0.05, 0.0, 10.0)
        v1 = A.gaussian_exact(fam, dim, 0.05, 1e-7, 10.0)
        assert np.isfinite(v0)
        assert abs(v0 - v1) < 1e-6 * abs(v0)


def test_gaussian_density_has_unit_mass():
    for dim in (2, 3):
        g = GridSpec(dim, 64)
        mass = A.GaussianSource(0.05, dim).sample(g).sum() * g.h**dim
        assert mass == pytest.approx(1.0, rel=1e-12)


def test_gaussian_source_validates():
    with pytest.raises(ValueError):
        A.GaussianSource(0.0, 3)
    with pytest.raises(ValueError):
        A.GaussianSource(0.1, 4)


# ------------------------------------------------------------- contrasts


@given(st.floats(0.001, 0.449))
def test_eaton_index_solves_defining_equation(r):
    n = A.eaton_index(r)
    a = A.LENS_RADIUS / r
    if n < A.EATON_NMAX:
        assert n * n - a / n - math.sqrt((a / n) ** 2 - 1) == pytest.approx(0, abs=1e-10)
    assert 1 <= n <= A.EATON_NMAX


def test_eaton_index_is_monotone_and_one_outside():
    r = np.linspace(0, 0.6, 400)
    n = A.eaton_index(r)
    assert np.all(np.diff(n) <= 1e-14)
    assert np.all(n[r >= A.LENS_RADIUS] == 1)
    assert n[0] == A.EATON_NMAX
    assert A.eaton_index(A.LENS_RADIUS * (1 - 1e-9)) == pytest.approx(1, abs=1e-3)


@pytest.mark.parametrize("kind,dim", [("disk", 2), ("luneburg", 2), ("eaton", 2), ("cube", 3)])
def test_contrasts_vanish_near_box_boundary(kind, dim):
    g = GridSpec(dim, 64)
    q = A.contrast_on_grid(A.ContrastFunction(kind), g)
    edge = np.take(q, 0, axis=0)
    assert np.max(np.abs(edge)) < 1e-10
    assert np.max(q) > 0.5


def test_luneburg_profile():
    c = A.ContrastFunction("luneburg")
    assert A.contrast_eval(c, [0.0, 0.0]) == 1.0
    assert A.contrast_eval(c, [0.3, 0.0]) == pytest.approx(1 - (0.3 / 0.45) ** 2)
    assert A.contrast_eval(c, [0.46, 0.0]) == 0.0


def test_custom_grid_contrast_roundtrip(tmp_path):
    g = GridSpec(2, 16)
    q = np.random.default_rng(1).random(g.shape)
    write_field(tmp_path / "q.bin", q)
    c = A.ContrastFunction("custom-grid", path=str(tmp_path / "q.bin"))
    assert np.array_equal(A.contrast_on_grid(c, g), q)
    with pytest.raises(ValueError):
        A.contrast_on_grid(c, GridSpec(2, 8))
    with pytest.raises(ValueError):
        A.contrast_eval(c, [0.0, 0.0])
    with pytest.raises(ValueError):
        A.ContrastFunction("custom-grid")


# ------------------------------------------------------- incident fields


def test_plane_wave_satisfies_discrete_helmholtz():
    k = 20.0
    f = A.IncidentField("plane_wave", k, direction=(1.0, 2.0))
    h = 1e-3
    x = np.array([0.1, -0.2])
    lap = sum(
        (A.incident_eval(f, x + h * e) - 2 * A.incident_eval(f, x) + A.incident_eval(f, x - h * e)) / h**2
        for e in np.eye(2))
    assert abs(lap + k * k * A.incident_eval(f, x)) < 1e-3 * k * k


@pytest.mark.parametrize("pt", [(0.1, 0.2), (-0.4, -0.3), (0.45, 0.0)])
def test_gaussian_beam_matches_mpmath(pt):
    k = 2 * math.pi * 10
    f = A.IncidentField("gaussian_beam", k)
    xc, yc = f.center
    R = mpmath.sqrt((pt[0] - mpmath.mpc(xc)) ** 2 + (pt[1] - yc) ** 2)
    ref = complex(mpmath.conj(mpmath.hankel1(0, k * R)) * mpmath.exp(-k / 2))
    assert A.incident_eval(f, np.array(pt)) == pytest.approx(ref, rel=1e-10)


def test_gaussian_beam_rejects_branch_cut_and_3d():
    f = A.IncidentField("gaussian_beam", 10.0)
    with pytest.raises(ValueError):
        A.incident_eval(f, np.array([-0.01, 0.5]))
    with pytest.raises(ValueError):
        A.incident_eval(f, np.zeros(3))
    with pytest.raises(ValueError):
        A.IncidentField("spherical", 1.0)


# ------------------------------------------------------------- dielectric


def test_dielectric_gradient_matches_finite_differences():
    atoms = A.AtomSet.synthetic(count=6, seed=3)
    rng = np.random.default_rng(0)
    x = atoms.centers[0] + 0.02 * rng.standard_normal(3)
    _, grad = A.dielectric_eval(atoms, x)
    h = 1e-6
    fd = np.array([(A.dielectric_eval(atoms, x + h * e)[0] - A.dielectric_eval(atoms, x - h * e)[0]) / (2 * h)
                   for e in np.eye(3)])
    assert np.allclose(grad, fd, rtol=1e-6, atol=1e-4)


def test_dielectric_limits():
    atoms = A.AtomSet([[0.0, 0.0, 0.0]], 0.05)
    eps, grad = A.dielectric_eval(atoms, np.array([[0.0, 0.0, 0.0], [0.49, 0.0, 0.0]]))
    assert eps[0] == pytest.approx(atoms.eps_in)
    assert np.allclose(grad[0], 0)
    assert eps[1] == pytest.approx(atoms.eps_out, rel=1e-12)


def test_atomset_validation_and_synthetic_ball():
    with pytest.raises(ValueError):
        A.AtomSet([[0, 0, 0]], -1.0)
    atoms = A.AtomSet.synthetic(count=20, seed=1)
    assert atoms.centers.shape == (20, 3)
    assert np.all(np.linalg.norm(atoms.centers, axis=1) <= 0.35)
    assert set(np.unique(atoms.charges)) <= {-1.0, 1.0}

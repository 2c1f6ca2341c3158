import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from volpot import kernels as K
from volpot.kernels import KernelSpec

K_HELM = 2 * math.pi * 3

BASE = [
    KernelSpec(3, "laplace"),
    KernelSpec(3, "helmholtz", k=K_HELM),
    KernelSpec(3, "biharmonic"),
    KernelSpec(2, "laplace"),
    KernelSpec(2, "helmholtz", k=K_HELM),
    KernelSpec(2, "biharmonic"),
]


def close(a, b, rtol=1e-10, atol=1e-12):
    return abs(a - b) <= max(rtol * abs(b), atol)


def test_spec_validation_and_defaults():
    assert KernelSpec(3, "laplace").L == 1.8
    assert KernelSpec(2, "laplace").L == 1.5
    with pytest.raises(ValueError):
        KernelSpec(3, "laplace", L=1.5)
    with pytest.raises(ValueError):
        KernelSpec(3, "helmholtz")
    with pytest.raises(ValueError):
        KernelSpec(2, "convected_helmholtz")
    with pytest.raises(ValueError):
        KernelSpec(2, "convected_helmholtz", h_vec=(0.0, 0.0))
    with pytest.raises(ValueError):
        KernelSpec(2, "laplace", h_vec=(1.0, 0.0))
    with pytest.raises(ValueError):
        KernelSpec(4, "laplace")
    assert KernelSpec(2, "convected_helmholtz", h_vec=(3.0, 4.0)).wavenumber == 5.0


def test_laplace_3d_origin_value():
    assert K.eval_spectral(KernelSpec(3, "laplace"), [0.0, 0.0, 0.0]).real == pytest.approx(1.62, rel=1e-14)


@pytest.mark.parametrize("spec", BASE, ids=lambda s: f"{s.dim}d-{s.family}")
def test_matches_oracle_including_removable_points(spec):
    pts = [0.0, 1e-9, 1e-4, 0.03, 0.2, 1.0, 3.7, 11.0, 30.0]
    if spec.k:
        pts += [spec.k, spec.k - 1e-7, spec.k + 1e-3, spec.k - 0.05]
    vals = K.eval_spectral_radial(spec, np.array(pts))
    for s, g in zip(pts, vals):
        assert close(g, K.radial_transform_oracle(spec, s)), s


@pytest.mark.parametrize("spec", BASE, ids=lambda s: f"{s.dim}d-{s.family}")
def test_series_and_closed_form_agree_at_switch(spec):
    for pole in K._removable_points(spec.dim, spec.family, spec.k):
        rs = K.switch_radius(spec, pole)
        for t in (0.999 * rs, 1.001 * rs):
            s = pole + t
            series = K.near_singularity_eval(spec, np.array([s]), pole)[0]
            closed = K._closed_form(spec.dim, spec.family, spec.k, spec.L, np.array([s]))[0]
            assert abs(series - closed) <= 1e-12 * abs(closed) + 1e-15


def test_near_singularity_rejects_other_points():
    with pytest.raises(ValueError):
        K.near_singularity_eval(KernelSpec(3, "laplace"), [0.1], pole=1.0)


@given(st.floats(0.0, 60.0), st.sampled_from([2, 3]), st.floats(0.5, 40.0))
def test_laplace_helmholtz_is_difference(s, dim, k):
    lh = K.eval_spectral_radial(KernelSpec(dim, "laplace_helmholtz", k=k), np.array([s]))[0]
    h = K.eval_spectral_radial(KernelSpec(dim, "helmholtz", k=k), np.array([s]))[0]
    lap = K.eval_spectral_radial(KernelSpec(dim, "laplace"), np.array([s]))[0]
    assert abs(lh - (h - lap)) <= 1e-12 * max(1.0, abs(h))


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_convected_is_shifted_helmholtz(sx, sy):
    h = (3.0, -4.0)
    conv = K.eval_spectral(KernelSpec(2, "convected_helmholtz", h_vec=h), [sx, sy])
    helm = K.eval_spectral_radial(KernelSpec(2, "helmholtz", k=5.0), np.array([math.hypot(sx - 3, sy + 4)]))[0]
    assert abs(conv - helm) <= 1e-12 * abs(helm)


@given(st.floats(0.0, 80.0), st.sampled_from([2, 3]), st.sampled_from(["laplace", "biharmonic"]))
def test_real_symmetric_families_are_real(s, dim, fam):
    v = K.eval_spectral_radial(KernelSpec(dim, fam), np.array([s]))[0]
    assert v.imag == 0


@given(st.lists(st.floats(-30, 30), min_size=3, max_size=3))
def test_radial_transform_depends_on_norm_only(sv):
    spec = KernelSpec(3, "helmholtz", k=7.0)
    a = K.eval_spectral(spec, sv)
    b = K.eval_spectral(spec, [-sv[2], sv[0], -sv[1]])
    assert abs(a - b) <= 1e-12 * abs(b)


def test_physical_values_and_truncation():
    spec = KernelSpec(3, "laplace")
    assert K.eval_physical(spec, [0.5, 0, 0]) == pytest.approx(1 / (2 * np.pi))
    assert K.eval_physical(spec, [1.8, 0, 0]) == pytest.approx(0.5 / (4 * np.pi * 1.8))
    assert K.eval_physical(spec, [1.9, 0, 0]) == 0
    with pytest.raises(ValueError):
        K.eval_physical(spec, [0, 0, 0])
    with pytest.raises(ValueError):
        K.eval_physical(spec, [1.0, 0])
    h2 = K.eval_physical(KernelSpec(2, "helmholtz", k=2.0), [0.3, 0.4])
    from scipy.special import hankel1
    assert h2 == pytest.approx(0.25j * hankel1(0, 1.0))
    assert K.eval_physical(KernelSpec(2, "biharmonic"), [0.0, 0.0]) == 0
    lh = K.eval_physical(KernelSpec(3, "laplace_helmholtz", k=3.0), [0.0, 0.0, 0.0])
    assert lh == pytest.approx(3j / (4 * np.pi))
    lh2 = K.eval_physical(KernelSpec(2, "laplace_helmholtz", k=3.0), [[0.0, 0.0], [1e-7, 0.0]])
    assert lh2[0] == pytest.approx(lh2[1], rel=1e-6)
    c = K.eval_physical(KernelSpec(2, "convected_helmholtz", h_vec=(1.0, 0.0)), [0.5, 0.0])
    assert c == pytest.approx(0.25j * hankel1(0, 0.5) * np.exp(0.5j))


def test_free_space_spectra():
    s = np.array([0.0, 1.0, 2.0])
    assert np.isnan(K.free_space_spectral(KernelSpec(3, "laplace"), s)[0])
    assert K.free_space_spectral(KernelSpec(3, "biharmonic"), s)[2] == -1 / 16
    assert np.isnan(K.free_space_spectral(KernelSpec(2, "helmholtz", k=2.0), s)[2])


def test_truncated_transform_approaches_free_space_far_from_origin():
    # truncation adds oscillation that decays relative to the free-space transform
    spec = KernelSpec(3, "laplace")
    s = np.array([200.0, 400.0])
    g = K.eval_spectral_radial(spec, s).real
    free = 1 / s**2
    assert np.all(np.abs(g - free) <= 1.01 * free)
    assert np.all(g >= 0)

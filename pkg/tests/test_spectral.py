import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdri import InvalidArgumentError, apply_circulant, build_gamma, criterion, freq_grid
from fdri._validation import ConsistencyError
from fdri.spectral import SpectralFilter

from oracles import dense_circulant, gamma_direct


def test_freq_grid_dc_only():
    g = freq_grid(1, 1)
    assert g.omegas.tolist() == [[0.0, 0.0]]


def test_freq_grid_axis_convention():
    g = freq_grid(4, 1)
    np.testing.assert_allclose(g.omega_x.ravel(), [0, np.pi / 2, np.pi, -np.pi / 2])
    np.testing.assert_array_equal(g.omega_y, 0.0)


def test_freq_grid_8x8_symmetry():
    g = freq_grid(8, 8)
    om = g.omegas
    assert len(om) == 64
    assert np.sum((om[:, 0] == np.pi) & (om[:, 1] == np.pi)) == 1
    # every frequency has its negation on the grid (Nyquist maps to itself)
    pairs = {(round(a, 12), round(b, 12)) for a, b in om}
    for a, b in om:
        na = -a if abs(a) != np.pi else a
        nb = -b if abs(b) != np.pi else b
        assert (round(na, 12), round(nb, 12)) in pairs
    assert np.all(om > -np.pi) and np.all(om <= np.pi)


@pytest.mark.parametrize("w,h", [(0, 4), (4, 0), (-1, 2)])
def test_freq_grid_rejects_bad_sizes(w, h):
    with pytest.raises(InvalidArgumentError):
        freq_grid(w, h)


def _gamma_at(filt, ix, iy):
    return filt.gamma[iy, ix]


def test_gamma_dc_value():
    f = build_gamma(freq_grid(8, 8), 0.5, 1e-5)
    assert _gamma_at(f, 0, 0) == pytest.approx(316.2277660168379, rel=1e-12)


def test_gamma_mu0_quarter_frequency():
    f = build_gamma(freq_grid(4, 4), 0.0, 1e-5)
    # index 1 of 4 is omega = pi/2
    assert _gamma_at(f, 1, 0) == pytest.approx(0.9999950000374997, rel=1e-12)


def test_gamma_mu1_nyquist_corner():
    f = build_gamma(freq_grid(8, 8), 1.0, 1e-5)
    assert _gamma_at(f, 4, 4) == pytest.approx(0.9999950000374997, rel=1e-12)


@pytest.mark.parametrize("mu,eps", [(-0.1, 1e-5), (1.01, 1e-5), (0.5, 0.0), (0.5, -1.0)])
def test_gamma_rejects_bad_parameters(mu, eps):
    with pytest.raises(InvalidArgumentError):
        build_gamma(freq_grid(4, 4), mu, eps)


@pytest.mark.parametrize("mu", [0.0, 0.25, 0.5, 1.0])
@pytest.mark.parametrize("shape", [(8, 8), (6, 10), (5, 7)])
def test_gamma_matches_direct_evaluation(mu, shape):
    h, w = shape
    g = freq_grid(w, h)
    f = build_gamma(g, mu, 1e-5)
    for iy in range(h):
        for ix in range(w):
            wx, wy = g.omega_x[iy, ix], g.omega_y[iy, ix]
            assert f.gamma[iy, ix] == pytest.approx(gamma_direct(wx, wy, mu, 1e-5), rel=1e-13)


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("shape", [(8, 8), (7, 12)])
def test_gamma_invariants(mu, shape):
    g = freq_grid(shape[1], shape[0])
    f = build_gamma(g, mu, 1e-5)
    gamma = f.gamma.ravel()
    assert np.all(np.isfinite(gamma)) and np.all(gamma > 0)
    np.testing.assert_array_equal(gamma, gamma[g.negate_index()])
    assert np.argmax(gamma) == 0


def test_gamma_monotone_along_x_for_mu1():
    g = freq_grid(64, 1)
    f = build_gamma(g, 1.0, 1e-5)
    wx = g.omega_x.ravel()
    order = np.argsort(np.abs(wx), kind="stable")
    vals = f.gamma.ravel()[order]
    assert np.all(np.diff(vals) <= 0)


def test_gamma_large_eps_is_flat():
    f = build_gamma(freq_grid(16, 16), 0.5, 1e6)
    assert f.gamma.max() / f.gamma.min() < 1 + 1e-5
    np.testing.assert_allclose(f.gamma, 1e-3, rtol=1e-5)


def _identity_filter(shape):
    h, w = shape
    return SpectralFilter(freq_grid(w, h), np.ones(shape), 0.0, 1.0)


@pytest.mark.parametrize("power", [-2, -1, 1, 2])
def test_identity_filter_is_identity(rng, power):
    x = rng.standard_normal((6, 8))
    np.testing.assert_allclose(apply_circulant(_identity_filter((6, 8)), x, power), x,
                               atol=1e-14)


def test_constant_image_scaled_by_dc_weight():
    f = build_gamma(freq_grid(8, 8), 0.5, 1e-5)
    out = apply_circulant(f, np.full((8, 8), 0.3), -2)
    np.testing.assert_allclose(out, 0.3 / 1e-5, rtol=1e-12)


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
def test_inverse_matches_dense_circulant_solve(rng, mu):
    f = build_gamma(freq_grid(8, 8), mu, 1e-5)
    C = dense_circulant(lambda wx, wy: gamma_direct(wx, wy, mu, 1e-5) ** -2, 8, 8)
    x = rng.standard_normal((8, 8))
    expected = np.linalg.solve(C, x.ravel()).reshape(8, 8)
    got = apply_circulant(f, x, -2)
    assert np.linalg.norm(got - expected) / np.linalg.norm(expected) < 1e-8
    got_c = apply_circulant(f, x, 2)
    np.testing.assert_allclose(got_c.ravel(), C @ x.ravel(), rtol=1e-9, atol=1e-12)


def test_apply_circulant_accepts_stacks(rng):
    f = build_gamma(freq_grid(8, 4), 0.5, 1e-5)
    xs = rng.standard_normal((3, 4, 8))
    stacked = apply_circulant(f, xs, -1)
    for x, out in zip(xs, stacked):
        np.testing.assert_allclose(apply_circulant(f, x, -1), out, rtol=1e-13)


def test_apply_circulant_dimension_mismatch():
    f = build_gamma(freq_grid(8, 8), 0.5, 1e-5)
    with pytest.raises(InvalidArgumentError):
        apply_circulant(f, np.zeros((8, 4)), -2)
    with pytest.raises(InvalidArgumentError):
        apply_circulant(f, np.zeros((8, 8)), 3)


def test_asymmetric_filter_detected(rng):
    gamma = np.ones((8, 8))
    gamma[1, 2] = 5.0  # breaks central symmetry
    bad = SpectralFilter(freq_grid(8, 8), gamma, 0.5, 1e-5)
    with pytest.raises(ConsistencyError):
        apply_circulant(bad, rng.standard_normal((8, 8)), -1)


def test_criterion_matches_dense_quadratic_form(rng):
    f = build_gamma(freq_grid(8, 8), 0.5, 1e-5)
    C = dense_circulant(lambda wx, wy: gamma_direct(wx, wy, 0.5, 1e-5) ** -2, 8, 8)
    x = rng.standard_normal((8, 8))
    dense = x.ravel() @ C @ x.ravel()
    assert criterion(f, x) == pytest.approx(dense, rel=1e-8)


images = st.integers(min_value=0, max_value=2 ** 31 - 1).map(
    lambda s: np.random.default_rng(s).standard_normal((8, 12)))
mus = st.floats(min_value=0.0, max_value=1.0)


@settings(max_examples=40, deadline=None)
@given(x=images, mu=mus)
def test_half_power_roundtrip(x, mu):
    f = build_gamma(freq_grid(12, 8), mu, 1e-5)
    back = apply_circulant(f, apply_circulant(f, x, 1), -1)
    assert np.linalg.norm(back - x) <= 1e-10 * np.linalg.norm(x)


@settings(max_examples=40, deadline=None)
@given(x=images, z=images, a=st.floats(-10, 10), b=st.floats(-10, 10), mu=mus)
def test_linearity(x, z, a, b, mu):
    f = build_gamma(freq_grid(12, 8), mu, 1e-5)
    lhs = apply_circulant(f, a * x + b * z, -2)
    rhs = a * apply_circulant(f, x, -2) + b * apply_circulant(f, z, -2)
    scale = abs(a) * np.linalg.norm(apply_circulant(f, x, -2)) + \
        abs(b) * np.linalg.norm(apply_circulant(f, z, -2))
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(scale, 1e-300)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), mu=mus, w=st.integers(1, 9), h=st.integers(1, 9),
       power=st.sampled_from([-2, -1, 1, 2]))
def test_real_output_for_any_grid(seed, mu, w, h, power):
    # ConsistencyError would be raised on a non-negligible imaginary residue
    f = build_gamma(freq_grid(w, h), mu, 1e-5)
    x = np.random.default_rng(seed).standard_normal((h, w))
    out = apply_circulant(f, x, power)
    assert out.dtype == np.float64 and out.shape == (h, w)

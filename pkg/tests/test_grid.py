import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenheat.grid import (DivergedFieldError, GridAnisotropyWarning, GridSpec, ScalarField,
                             group_convolve, integrate, interpolate, read_hfield, sample,
                             weighted_sup_norm, write_hfield)
from heisenheat.group import GroupPoint, gauge

from conftest import quiet_grid
from oracles import brute_force_convolution


def test_gridspec_validation():
    for bad in [dict(N_xy=64), dict(N_tau=3), dict(L_xy=-1.0), dict(n=0)]:
        with pytest.raises(ValueError):
            GridSpec(**{**dict(n=1, L_xy=2.0, L_tau=4.0, N_xy=9, N_tau=9), **bad})
    with pytest.warns(GridAnisotropyWarning):
        GridSpec(1, 4.0, 8.0, 9, 9)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        GridSpec(1, 2.0, 4.0, 9, 9)


def test_origin_is_a_node(small_grid):
    assert small_grid.node(small_grid.center_index) == GroupPoint([0], [0], 0)
    p = small_grid.node((8, 0, 3))
    assert small_grid.index_of(p) == (8, 0, 3)


def test_sample_examples(small_grid):
    assert np.all(sample(lambda p: 1.0, small_grid).values == 1.0)
    g = sample(gauge, small_grid)
    assert g.center_value() == 0.0
    w = sample(lambda p: (1 + gauge(p) ** 2) ** -1, small_grid)
    assert w.values[small_grid.index_of(GroupPoint([1], [0], 0))] == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError, match="not finite"):
        sample(lambda p: math.inf if p.tau > 1 else 0.0, small_grid)


def test_sample_vectorized_matches_pointwise(small_grid):
    f = sample(lambda p: p.x[0] * p.tau - p.y[0] ** 2, small_grid)
    g = sample(lambda x, y, t: x[0] * t - y[0] ** 2, small_grid, vectorized=True)
    assert np.allclose(f.values, g.values, rtol=0, atol=1e-14)


def test_integrate_examples(small_grid):
    ones = ScalarField(small_grid, np.ones(small_grid.shape))
    assert integrate(ones) == pytest.approx(small_grid.box_volume, rel=1e-12)
    assert small_grid.box_volume == pytest.approx((2 * 2.0) ** 2 * (2 * 4.0))
    u = sample(lambda x, y, t: np.sin(x[0]) + t ** 2, small_grid, vectorized=True)
    assert integrate(u.with_values(-u.values)) == -integrate(u)
    with pytest.raises(DivergedFieldError):
        integrate(ScalarField(small_grid, np.full(small_grid.shape, np.nan), diverged=True))


def test_integrate_gaussian():
    g = quiet_grid(1, 6.0, 6.0, 65, 65)
    u = sample(lambda x, y, t: np.exp(-x[0] ** 2 - y[0] ** 2 - t ** 2), g, vectorized=True)
    assert integrate(u) == pytest.approx(math.pi ** 1.5, rel=1e-2)


def test_weighted_sup_norm_examples(small_grid):
    z = ScalarField.zeros(small_grid)
    assert weighted_sup_norm(z, 0.5, 2.0) == 0.0
    t, kappa = 0.7, 3.0
    u = ScalarField(small_grid, (1 + t + small_grid.gauge_squared()) ** (-kappa / 2))
    assert weighted_sup_norm(u, t, kappa) == pytest.approx(1.0, rel=1e-14)
    v = sample(lambda x, y, t: np.cos(x[0] + t), small_grid, vectorized=True)
    assert weighted_sup_norm(v, 0.3, 0.0) == pytest.approx(np.abs(v.values).max())


def test_interpolate_hits_nodes_and_zero_outside(small_grid):
    u = sample(lambda x, y, t: 1 + x[0] + 2 * y[0] - t, small_grid, vectorized=True)
    x, y, t = small_grid.coordinates()
    vals = interpolate(u, np.array(x), np.array(y), t)
    assert np.allclose(vals, u.values)
    assert interpolate(u, np.array([[10.0]]), np.array([[0.0]]), np.array([0.0]))[0] == 0.0
    # linear data are reproduced between nodes
    assert interpolate(u, np.array([[0.1]]), np.array([[0.2]]), np.array([0.33]))[0] == pytest.approx(
        1 + 0.1 + 0.4 - 0.33)


def test_convolve_with_discrete_delta_is_identity(small_grid):
    rng = np.random.default_rng(1)
    v = ScalarField(small_grid, rng.standard_normal(small_grid.shape))
    h = ScalarField.zeros(small_grid)
    h.values[small_grid.center_index] = 1.0 / small_grid.quadrature_weights()[small_grid.center_index]
    assert np.allclose(group_convolve(v, h).values, v.values, rtol=0, atol=1e-12)


def test_convolve_mass_preservation():
    g = GridSpec(1, 3.0, 9.0, 25, 25)
    one = ScalarField(g, np.ones(g.shape))
    h = sample(lambda x, y, t: np.exp(-4 * (x[0] ** 2 + y[0] ** 2) - 4 * t ** 2), g, vectorized=True)
    h = h.with_values(h.values / integrate(h))
    assert group_convolve(one, h).center_value() == pytest.approx(1.0, abs=1e-2)


def test_convolve_matches_brute_force():
    g = GridSpec(1, 1.5, 3.0, 7, 7)
    rng = np.random.default_rng(7)
    v = ScalarField(g, rng.standard_normal(g.shape))
    h = ScalarField(g, rng.random(g.shape))
    got = group_convolve(v, h).values
    ref = brute_force_convolution(v.values, h.values, g.xy_axis, g.tau_axis, g.quadrature_weights())
    assert np.allclose(got, ref, rtol=0, atol=1e-12 * np.abs(ref).max())


def test_convolve_tau_shifted_delta():
    g = GridSpec(1, 1.5, 3.0, 7, 11)
    v = sample(lambda x, y, t: np.exp(-x[0] ** 2 - t ** 2), g, vectorized=True)
    h = ScalarField.zeros(g)
    c = g.center_index
    shifted = (c[0], c[1], c[2] + 2)
    h.values[shifted] = 1.0 / g.quadrature_weights()[shifted]
    out = group_convolve(v, h).values
    # (v * delta_(0,0,s))(x, y, tau) = v(x, y, tau - s)
    assert np.allclose(out[:, :, 2:], v.values[:, :, :-2], atol=1e-12)
    assert np.all(out[:, :, :2] == 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_convolve_bilinear(a, b, seed):
    g = GridSpec(1, 1.5, 3.0, 7, 7)
    rng = np.random.default_rng(seed)
    v1, v2, h1, h2 = (ScalarField(g, rng.standard_normal(g.shape)) for _ in range(4))
    lhs = group_convolve(v1.with_values(a * v1.values + b * v2.values), h1).values
    rhs = a * group_convolve(v1, h1).values + b * group_convolve(v2, h1).values
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (1 + np.abs(rhs).max()))
    lhs = group_convolve(v1, h1.with_values(a * h1.values + b * h2.values)).values
    rhs = a * group_convolve(v1, h1).values + b * group_convolve(v1, h2).values
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (1 + np.abs(rhs).max()))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_integral_of_nonnegative_field(seed):
    g = GridSpec(1, 2.0, 4.0, 9, 9)
    u = ScalarField(g, np.random.default_rng(seed).random(g.shape))
    assert integrate(u) >= 0


def test_convolve_grid_mismatch(small_grid):
    other = GridSpec(1, 2.0, 4.0, 11, 9)
    with pytest.raises(ValueError):
        group_convolve(ScalarField.zeros(small_grid), ScalarField.zeros(other))


def test_hfield_round_trip(tmp_path, small_grid):
    u = sample(lambda x, y, t: np.sin(x[0] * y[0]) + t / 3, small_grid, vectorized=True)
    path = write_hfield(u, tmp_path / "u.hfield")
    back = read_hfield(path)
    assert back.grid == small_grid
    assert np.array_equal(back.values, u.values)
    (tmp_path / "bad.hfield").write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_hfield(tmp_path / "bad.hfield")

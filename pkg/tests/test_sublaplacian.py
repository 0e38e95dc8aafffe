import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenheat.grid import GridSpec, ScalarField, sample
from heisenheat.sublaplacian import (apply_sublaplacian, apply_vector_field, row_sum_bound,
                                     stability_timestep, sum_of_squares_apply)

from conftest import quiet_grid

G = GridSpec(1, 2.0, 4.0, 17, 17)
INNER = (slice(1, -1),) * 3
INNER2 = (slice(2, -2),) * 3


def field(f, g=G):
    return sample(f, g, vectorized=True)


# polynomial, its image under Delta_H = d_xx + d_yy + 4 r^2 d_tt + 4 (y d_xt - x d_yt)
SYMBOLIC = {
    "1": (lambda x, y, t: 1.0 + 0 * t, lambda x, y, t: 0 * t),
    "x": (lambda x, y, t: x[0] + 0 * t, lambda x, y, t: 0 * t),
    "y": (lambda x, y, t: y[0] + 0 * t, lambda x, y, t: 0 * t),
    "tau": (lambda x, y, t: t + 0 * x[0], lambda x, y, t: 0 * t),
    "x^2": (lambda x, y, t: x[0] ** 2 + 0 * t, lambda x, y, t: 2.0 + 0 * t),
    "y^2": (lambda x, y, t: y[0] ** 2 + 0 * t, lambda x, y, t: 2.0 + 0 * t),
    "tau^2": (lambda x, y, t: t ** 2 + 0 * x[0], lambda x, y, t: 8 * (x[0] ** 2 + y[0] ** 2) + 0 * t),
    "x tau": (lambda x, y, t: x[0] * t, lambda x, y, t: 4 * y[0] + 0 * t),
    "y tau": (lambda x, y, t: y[0] * t, lambda x, y, t: -4 * x[0] + 0 * t),
    "x y": (lambda x, y, t: x[0] * y[0] + 0 * t, lambda x, y, t: 0 * t),
}


@pytest.mark.parametrize("name", SYMBOLIC)
def test_exact_on_quadratic_span(name):
    f, image = SYMBOLIC[name]
    got = apply_sublaplacian(field(f)).values[INNER]
    want = field(image).values[INNER]
    assert np.max(np.abs(got - want)) <= 1e-9


def test_vector_field_examples():
    one = apply_vector_field(field(lambda x, y, t: x[0] + 0 * t), "X1").values[INNER]
    assert np.allclose(one, 1.0, rtol=0, atol=1e-12)
    got = apply_vector_field(field(lambda x, y, t: t + 0 * x[0]), ("X", 0)).values[INNER]
    assert np.allclose(got, field(lambda x, y, t: 2 * y[0] + 0 * t).values[INNER], atol=1e-12)
    got = apply_vector_field(field(lambda x, y, t: t + 0 * x[0]), "Y1").values[INNER]
    assert np.allclose(got, field(lambda x, y, t: -2 * x[0] + 0 * t).values[INNER], atol=1e-12)
    with pytest.raises(ValueError):
        apply_vector_field(field(lambda x, y, t: t + 0 * x[0]), "X2")


def test_commutator_on_tau():
    u = field(lambda x, y, t: t + 0 * x[0])
    xy = apply_vector_field(apply_vector_field(u, "Y1"), "X1").values
    yx = apply_vector_field(apply_vector_field(u, "X1"), "Y1").values
    assert np.allclose((xy - yx)[INNER2], -4.0, atol=1e-9)


def test_sum_of_squares_examples():
    assert np.allclose(sum_of_squares_apply(field(lambda x, y, t: x[0] ** 2 + 0 * t)).values[INNER2],
                       2.0, atol=1e-8)
    assert np.all(sum_of_squares_apply(ScalarField(G, np.full(G.shape, 3.0))).values[INNER2] == 0)


def gaussian(x, y, t):
    return np.exp(-x[0] ** 2 - y[0] ** 2 - t ** 2)


def gaussian_image(x, y, t):
    r2 = x[0] ** 2 + y[0] ** 2
    return (4 * r2 - 4 + 4 * r2 * (4 * t ** 2 - 2)) * gaussian(x, y, t)


def _interior_error(N, op=apply_sublaplacian, ref=None):
    g = quiet_grid(1, 3.0, 3.0, N, N)
    got = op(field(gaussian, g)).values
    want = field(gaussian_image, g).values if ref is None else ref(g)
    # compare on the nodes of the coarsest grid away from the box edge
    step = (N - 1) // 32
    sl = (slice(4 * step, -4 * step, step),) * 3
    return np.max(np.abs(got - want)[sl])


def test_refinement_order():
    e1, e2 = _interior_error(33), _interior_error(65)
    assert np.log2(e1 / e2) >= 1.9


def test_sum_of_squares_agrees_under_refinement():
    def diff(N):
        return _interior_error(N, sum_of_squares_apply, lambda g: apply_sublaplacian(field(gaussian, g)).values)
    d1, d2 = diff(33), diff(65)
    assert d2 < d1 / 1.9


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31))
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    u, v = (ScalarField(G, rng.standard_normal(G.shape)) for _ in range(2))
    lhs = apply_sublaplacian(u.with_values(a * u.values + b * v.values)).values
    rhs = a * apply_sublaplacian(u).values + b * apply_sublaplacian(v).values
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())


def test_too_small_grid_rejected():
    with pytest.raises(ValueError):
        GridSpec(1, 1.0, 1.0, 3, 5)


def test_stability_timestep_examples():
    g = GridSpec(1, 4.0, 16.0, 65, 65)
    rep = stability_timestep(g, 0.4, power_iterations=200)
    assert rep.suggested_dt > 0
    assert rep.suggested_dt <= 0.4 / rep.max_abs_row_sum * (1 + 1e-15)
    assert rep.max_abs_row_sum == row_sum_bound(g)
    assert rep.suggested_dt * rep.spectral_radius <= 1.0
    assert stability_timestep(g, 1.0).suggested_dt == pytest.approx(2 * stability_timestep(g, 0.5).suggested_dt)
    # the tau term 8 r^2 / h_tau^2 dominates here, so only joint refinement quarters dt
    fine = GridSpec(1, 4.0, 16.0, 129, 129)
    assert stability_timestep(fine).suggested_dt == pytest.approx(stability_timestep(g).suggested_dt / 4)
    wider = GridSpec(1, 4.0, 16.0, 129, 65)
    assert stability_timestep(wider).suggested_dt < stability_timestep(g).suggested_dt
    with pytest.raises(ValueError):
        stability_timestep(g, 0.0)


def test_explicit_step_is_stable_at_full_safety():
    from heisenheat.heat import propagate_linear
    g = GridSpec(1, 2.0, 4.0, 17, 17)
    rng = np.random.default_rng(0)
    u = ScalarField(g, rng.standard_normal(g.shape))
    dt = stability_timestep(g, 1.0).suggested_dt
    out = propagate_linear(u, 500 * dt, dt=dt)
    assert np.abs(out.values).max() <= np.abs(u.values).max()

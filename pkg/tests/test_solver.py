import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenheat.grid import GridSpec, ScalarField
from heisenheat.solver import (BLOWUP, HORIZON, SolverConfig, extrapolate_lifespan, initial_datum,
                               richardson_lifespan, run, step)

from conftest import quiet_grid
from oracles import ode_lifespan

FLAT = quiet_grid(1, 50.0, 2500.0, 5, 5)
SMALL = GridSpec(1, 3.0, 9.0, 17, 17)


def test_config_validation():
    with pytest.raises(ValueError, match="p must exceed 1"):
        SolverConfig(p=1.0, epsilon=1.0)
    for bad in [dict(epsilon=0), dict(dt_safety=1.5), dict(boundary="neumann"), dict(u0_kind="x"),
                dict(record_every=0)]:
        with pytest.raises(ValueError):
            SolverConfig(**{**dict(p=2.0, epsilon=1.0), **bad})
    assert SolverConfig(p=2.0, epsilon=0.5).threshold == 5000.0


def test_initial_data():
    b = initial_datum("compact_bump", {"R0": 1.0}, SMALL)
    assert b.center_value() == 1.0 and b.sup_norm() == 1.0
    r2 = SMALL.radius_squared()
    tau = np.broadcast_to(SMALL.coordinates()[2], SMALL.shape)
    assert np.all(b.values[r2 + np.abs(tau) >= 1.0] == 0)
    w = initial_datum("weighted_decay", {"kappa": 2.0}, SMALL)
    assert w.center_value() == 1.0
    assert np.allclose(w.values, 1 / (1 + SMALL.gauge_squared()))
    assert np.all(initial_datum("constant", None, SMALL).values == 1)
    with pytest.raises(ValueError):
        initial_datum("compact_bump", {"R0": 100.0}, SMALL)
    with pytest.raises(ValueError):
        initial_datum("constant", {"R0": 1.0}, SMALL)
    with pytest.raises(ValueError):
        initial_datum("spike", None, SMALL)


def test_step_examples():
    c = ScalarField(SMALL, np.full(SMALL.shape, 2.0))
    out = step(c, 0.01, 2.0, boundary="periodic")
    assert np.allclose(out.values, 2.0 + 0.01 * 4.0, rtol=1e-14)
    z = step(ScalarField.zeros(SMALL), 0.01, 3.0)
    assert np.all(z.values == 0)
    lin = step(c, 0.01, 2.0, boundary="periodic", nonlinear=False)
    assert np.allclose(lin.values, 2.0)
    huge = step(ScalarField(SMALL, np.full(SMALL.shape, 1e200)), 1.0, 2.0, boundary="periodic")
    assert huge.diverged


@pytest.mark.parametrize("amp", [1.0, 0.5, 0.25])
def test_constant_data_follow_the_ode(amp):
    cfg = SolverConfig(p=2.0, epsilon=amp, grid=FLAT, boundary="periodic", u0_kind="constant",
                       t_max=100.0, c_nl=0.01)
    T, coarse, fine = richardson_lifespan(cfg)
    want = ode_lifespan(amp, 2.0)
    assert T == pytest.approx(want, rel=1e-2)
    assert abs(T - want) < abs(fine - want) < abs(coarse - want)


def test_extrapolation_of_exact_profile():
    # u = 1 / (T - t) is exact for p = 2
    t = np.linspace(0, 0.999, 400)
    T = extrapolate_lifespan(t, 1 / (1 - t), 2.0, 1e3, 0.01)
    assert T == pytest.approx(1.0, rel=1e-10)


def test_horizon_and_contamination_flags():
    r = run(SolverConfig(p=3.0, epsilon=0.01, grid=SMALL, u0_kind="compact_bump", t_max=0.5))
    assert r.termination == HORIZON and r.lifespan_estimate is None
    assert r.times[-1] == pytest.approx(0.5)
    assert not r.contaminated
    w = run(SolverConfig(p=3.0, epsilon=0.01, grid=SMALL, u0_kind="weighted_decay", t_max=0.5))
    assert w.contaminated


def test_snapshots_and_weighted_norms():
    r = run(SolverConfig(p=2.0, epsilon=0.1, grid=SMALL, u0_kind="weighted_decay", t_max=0.2, kappa=2.0,
                         snapshot_times=(0.0, 0.1, 0.2)))
    assert sorted(r.snapshots) == [0.0, 0.1, 0.2]
    assert r.weighted_norms[0] == pytest.approx(0.1)
    assert r.snapshots[0.2].sup_norm() == pytest.approx(r.sup_norms[-1])


@settings(max_examples=6, deadline=None)
@given(st.floats(10.0, 20.0), st.floats(1.1, 1.5))
def test_lifespan_decreases_with_amplitude(eps, factor):
    def T(e):
        rec = run(SolverConfig(p=2.0, epsilon=e, grid=SMALL, t_max=50.0, c_nl=0.05))
        assert rec.termination == BLOWUP
        return rec.lifespan_estimate
    assert T(eps * factor) < T(eps)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from heisenheat.estimators import LifespanScalingRegressor
from heisenheat.grid import GridSpec
from heisenheat.solver import SolverConfig
from heisenheat.sweep import (CRITICAL, SUBCRITICAL, SUPERCRITICAL, SweepConfig, classify_regime,
                              geometric_ladder, grid_policy, run_sweep, runs_test, theory_slope)

SMALL = GridSpec(1, 3.0, 9.0, 17, 17)


def test_classify_regime():
    assert classify_regime(1.25, 4) == SUBCRITICAL
    assert classify_regime(1.5, 4) == CRITICAL
    assert classify_regime(2.0, 4) == SUPERCRITICAL
    assert classify_regime(4 / 3, 6) == CRITICAL
    with pytest.raises(ValueError, match="p must exceed 1"):
        classify_regime(1.0, 4)


def test_theory_slope():
    assert theory_slope(1.25, 4) == pytest.approx(-0.5)
    assert theory_slope(1.2, 4) == pytest.approx(-1 / 3)
    with pytest.raises(ValueError):
        theory_slope(1.5, 4)


def test_geometric_ladder():
    eps = geometric_ladder(2.0, 6)
    assert eps[0] == 2.0 and eps[-1] == pytest.approx(2.0 * 2 ** -2.5)
    assert np.allclose(np.diff(np.log(eps)), -0.5 * math.log(2))


def test_grid_policy():
    g = grid_policy(1.0)
    assert (g.L_xy, g.L_tau, g.N_xy) == (4.0, 16.0, 65)
    assert grid_policy(4.0).L_xy == pytest.approx(2 * g.L_xy)
    assert grid_policy(1.0, N=97).N_xy == 97
    assert g.h_xy <= g.L_xy / 32
    with pytest.raises(MemoryError):
        grid_policy(1.0, N=1025)
    with pytest.raises(ValueError):
        grid_policy(1.0, N=33)


def test_sweep_config_validation():
    base = SolverConfig(p=2.0, epsilon=1.0, grid=SMALL)
    with pytest.raises(ValueError):
        SweepConfig(2.0, (1.0, 0.5), base)
    with pytest.raises(ValueError):
        SweepConfig(2.0, (1.0, 2.0, 0.5), base)
    with pytest.raises(ValueError):
        SweepConfig(0.9, (1.0, 0.5, 0.2), base)
    sc = SweepConfig(1.25, (2.0, 1.0, 0.5), base, expected_T0=1.0)
    # T ~ eps^-0.5, so eps / 4 doubles T and widens the box by sqrt 2
    assert sc.grid_for(2).L_xy == pytest.approx(math.sqrt(2) * sc.grid_for(0).L_xy)
    assert SweepConfig(1.25, (2.0, 1.0, 0.5), base, grid=SMALL).grid_for(2) == SMALL


def test_supercritical_sweep_is_deterministic():
    base = SolverConfig(p=2.0, epsilon=1.0, grid=SMALL, t_max=5.0, c_nl=0.05)
    sc = SweepConfig(2.0, (16.0, 12.0, 0.5, 0.25), base, grid=SMALL)
    a, b = run_sweep(sc), run_sweep(sc)
    assert a.passed
    assert a.details["epsilon_star_upper"] == 12.0 and a.details["epsilon_star_lower"] == 0.5
    assert [r.T_h for r in a.runs] == [r.T_h for r in b.runs]


def test_runs_test():
    assert runs_test([1, -1] * 10) < 0.05
    assert runs_test([1] * 10 + [-1] * 10) < 0.05
    assert runs_test([1, 1, -1, 1, -1, -1, 1, -1, 1, 1, -1, -1]) > 0.05


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, -0.1), st.floats(-2, 2))
def test_power_regressor_recovers_exact_law(slope, logC):
    eps = np.geomspace(1, 0.1, 6)
    T = np.exp(logC) * eps ** slope
    reg = LifespanScalingRegressor().fit(eps, T)
    assert reg.slope_ == pytest.approx(slope, abs=1e-9)
    assert reg.intercept_ == pytest.approx(logC, abs=1e-9)
    assert reg.r2_ == pytest.approx(1.0)
    assert np.allclose(reg.predict(eps), T, rtol=1e-9)


def test_exponential_regressor():
    eps = np.array([8.0, 6.4, 5.4, 4.7])
    T = np.exp(0.3 + 2.0 * eps ** -0.5)
    reg = LifespanScalingRegressor(form="exponential", exponent=0.5).fit(eps, T)
    assert reg.slope_ == pytest.approx(2.0) and reg.score(eps, T) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        LifespanScalingRegressor(form="cubic").fit(eps, T)


def test_regressor_follows_estimator_conventions():
    reg = LifespanScalingRegressor(form="exponential", exponent=0.25)
    assert clone(reg).get_params() == {"form": "exponential", "exponent": 0.25}
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        reg.predict([1.0])
    for bad in [([1, 2], [1, 2]), ([1, 2, -3], [1, 2, 3]), ([1, 2, 3], [1, 2])]:
        with pytest.raises(ValueError):
            reg.fit(*bad)

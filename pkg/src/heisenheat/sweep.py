"""Epsilon sweeps of the semilinear solver and lifespan-scaling fits.

For ``1 < p < 1 + 2/Q`` the lifespan behaves like
``eps^(-(1/(p-1) - Q/2)^(-1))``; at ``p = 1 + 2/Q`` like
``exp(C eps^(-(p-1)))``; above it small data give global solutions.  A
sweep runs the solver over a geometric ladder of amplitudes and compares
the fitted law with the expected one.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .estimators import LifespanScalingRegressor
from .grid import GridSpec
from .solver import BLOWUP, HORIZON, SolverConfig, TrajectoryRecord, run

__all__ = [
    "SUBCRITICAL",
    "CRITICAL",
    "SUPERCRITICAL",
    "classify_regime",
    "theory_slope",
    "grid_policy",
    "SweepConfig",
    "SweepRun",
    "SweepResult",
    "run_sweep",
    "geometric_ladder",
    "runs_test",
]

SUBCRITICAL, CRITICAL, SUPERCRITICAL = "subcritical", "critical", "supercritical"
CRITICAL_TOL = 1e-12
DEFAULT_MEMORY_CAP = 1 << 30


def classify_regime(p: float, Q: int) -> str:
    if not p > 1:
        raise ValueError("p must exceed 1")
    pf = 1.0 + 2.0 / Q
    if abs(p - pf) <= CRITICAL_TOL:
        return CRITICAL
    return SUBCRITICAL if p < pf else SUPERCRITICAL


def theory_slope(p: float, Q: int) -> float:
    """Exponent of eps in the subcritical lifespan law."""
    if classify_regime(p, Q) != SUBCRITICAL:
        raise ValueError(f"p={p} is not subcritical for Q={Q}; the power law does not apply")
    return -1.0 / (1.0 / (p - 1) - Q / 2)


def geometric_ladder(eps0: float, count: int, ratio: float = 2 ** -0.5) -> list[float]:
    return [eps0 * ratio**k for k in range(count)]


def grid_policy(expected_T: float, n: int = 1, N: int | None = None, xy_factor: float = 4.0,
                memory_cap: int = DEFAULT_MEMORY_CAP, fields: int = 2) -> GridSpec:
    """Box ``L_xy = xy_factor sqrt(T)``, ``L_tau = L_xy^2``, ``h_xy <= L_xy / 32``.

    ``fields`` padded arrays of 8-byte values must fit under ``memory_cap``.
    """
    if not expected_T > 0:
        raise ValueError("expected_T must be positive")
    L = xy_factor * math.sqrt(expected_T)
    N = 65 if N is None else int(N)
    if N < 65:
        raise ValueError("N must be at least 65 to keep h_xy <= L_xy/32")
    if N % 2 == 0:
        N += 1
    need = fields * 8 * (N + 2) ** (2 * n + 1)
    if need > memory_cap:
        coarse = 65
        raise MemoryError(f"{N}-node axes need {need / 2**20:.0f} MiB (cap {memory_cap / 2**20:.0f} MiB); "
                          f"use N={coarse} or raise the cap")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return GridSpec(n, L, L * L, N, N)


@dataclass(frozen=True)
class SweepConfig:
    """``base`` supplies every solver setting except epsilon and (optionally) the grid.

    With ``grid`` set, every run uses that grid so the discretized datum is
    the same across the ladder.  Without it each run gets
    ``grid_policy(expected_T(eps))`` from the theory law anchored at
    ``expected_T0`` for the first epsilon.
    """

    p: float
    epsilons: tuple
    base: SolverConfig
    grid: GridSpec | None = None
    expected_T0: float = 10.0
    workers: int = 1
    N: int | None = None
    memory_cap: int = DEFAULT_MEMORY_CAP

    def __post_init__(self):
        classify_regime(self.p, self.base.grid.Q)
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if len(eps) < 3:
            raise ValueError("a sweep needs at least 3 epsilons")
        if any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
            raise ValueError("epsilons must be positive and strictly decreasing")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def grid_for(self, k: int) -> GridSpec:
        if self.grid is not None:
            return self.grid
        n = self.base.grid.n
        Q = 2 * n + 2
        regime = classify_regime(self.p, Q)
        ratio = self.epsilons[0] / self.epsilons[k]
        if regime == SUBCRITICAL:
            T = self.expected_T0 * ratio ** (-theory_slope(self.p, Q))
        else:
            T = max(self.expected_T0, self.base.t_max if regime == SUPERCRITICAL else self.expected_T0)
        return grid_policy(T, n, self.N, memory_cap=self.memory_cap)

    def solver_config(self, k: int) -> SolverConfig:
        return replace(self.base, p=self.p, epsilon=self.epsilons[k], grid=self.grid_for(k))


@dataclass
class SweepRun:
    epsilon: float
    T_h: float | None
    termination: str
    contaminated: bool
    grid: GridSpec
    final_sup: float
    sup_decreasing_late: bool
    extra: object = None


@dataclass
class SweepResult:
    regime: str
    runs: list
    theory_slope: float = math.nan
    fitted_slope: float = math.nan
    fitted_intercept: float = math.nan
    r_squared: float = math.nan
    passed: bool = False
    details: dict = field(default_factory=dict)

    def usable(self) -> list:
        return [r for r in self.runs if r.termination == BLOWUP and not r.contaminated and r.T_h]


def _late_decreasing(rec: TrajectoryRecord, t0: float = 1.0) -> bool:
    i = int(np.searchsorted(rec.times, t0))
    s = rec.sup_norms[i:]
    return bool(s.size < 2 or np.all(np.diff(s) <= 0))


def _one(args):
    cfg, hook = args
    rec = run(cfg)
    extra = hook(rec) if hook is not None else None
    return SweepRun(cfg.epsilon, rec.lifespan_estimate, rec.termination, rec.contaminated, cfg.grid,
                    float(rec.sup_norms[-1]), _late_decreasing(rec), extra)


def runs_test(residuals) -> float:
    """Two-sided Wald-Wolfowitz p-value for the signs of ``residuals`` (normal approximation)."""
    s = np.sign(np.asarray(residuals, dtype=np.float64))
    s = s[s != 0]
    n1, n2 = int(np.sum(s > 0)), int(np.sum(s < 0))
    if n1 == 0 or n2 == 0:
        return 0.0 if s.size > 1 else 1.0
    runs = 1 + int(np.sum(s[1:] != s[:-1]))
    n = n1 + n2
    mu = 2.0 * n1 * n2 / n + 1
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1))
    if var <= 0:
        return 1.0
    return float(2 * stats.norm.sf(abs(runs - mu) / math.sqrt(var)))


def run_sweep(config: SweepConfig, hook=None) -> SweepResult:
    """Run every epsilon and fit the law for the regime.

    ``hook(record)`` runs next to each solve (inside the worker) and its
    picklable return value is stored on the run; the record itself, with
    its snapshots, is dropped afterwards.
    """
    Q = config.base.grid.Q
    regime = classify_regime(config.p, Q)
    tasks = [(config.solver_config(k), hook) for k in range(len(config.epsilons))]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            runs = list(pool.map(_one, tasks))
    else:
        runs = [_one(t) for t in tasks]
    result = SweepResult(regime, runs)
    if regime == SUPERCRITICAL:
        return _supercritical(result)
    kinds = {r.termination for r in runs}
    if len(kinds) > 1:
        detail = ", ".join(f"eps={r.epsilon:.4g}: {r.termination}" for r in runs)
        warnings.warn(f"mixed terminations in a {regime} sweep ({detail})", RuntimeWarning, stacklevel=2)
    good = result.usable()
    if len(good) < 3:
        raise ValueError(f"only {len(good)} usable blow-up runs; need 3")
    eps = np.array([r.epsilon for r in good])
    T = np.array([r.T_h for r in good])
    if regime == SUBCRITICAL:
        reg = LifespanScalingRegressor(form="power").fit(eps, T)
        result.theory_slope = theory_slope(config.p, Q)
        result.passed = bool(abs(reg.slope_ - result.theory_slope) <= 0.2 * abs(result.theory_slope)
                             and reg.r2_ >= 0.95)
    else:
        reg = LifespanScalingRegressor(form="exponential", exponent=config.p - 1).fit(eps, T)
        loglog = np.diff(np.log(T)) / np.diff(np.log(eps))
        result.details["loglog_local_slopes"] = loglog.tolist()
        result.details["superpolynomial"] = bool(np.all(np.diff(np.abs(loglog)) > 0))
        result.passed = bool(reg.slope_ > 0 and reg.r2_ >= 0.9)
    result.fitted_slope, result.fitted_intercept, result.r_squared = reg.slope_, reg.intercept_, reg.r2_
    result.details["runs_test_p"] = runs_test(reg.residuals_)
    return result


def _supercritical(result: SweepResult) -> SweepResult:
    # below eps* every run reaches the horizon with a decaying sup norm, above it every run blows up
    runs = result.runs
    glob = [r.termination == HORIZON and r.sup_decreasing_late for r in runs]
    split = None
    for k in range(len(runs) + 1):
        if all(r.termination == BLOWUP for r in runs[:k]) and all(glob[k:]):
            split = k
            break
    result.passed = split is not None and split < len(runs)
    if result.passed:
        result.details["epsilon_star_upper"] = runs[split - 1].epsilon if split > 0 else math.inf
        result.details["epsilon_star_lower"] = runs[split].epsilon
    return result

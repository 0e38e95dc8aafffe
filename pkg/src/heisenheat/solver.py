"""Forward-Euler integration of u_t = Delta_H u + |u|^p with blow-up detection.

The step is ``dt = min(dt_cfl, c_nl * ||u||^(1-p))``: the stability limit of
the linear stencil, capped so the ODE part never grows by more than a
factor ``1 + c_nl`` per step.  A run ends when the sup norm reaches the
threshold ``M`` (blow-up), the horizon, or when values stop being finite.
On blow-up the lifespan is extrapolated from the terminal window by fitting
``||u||^(1-p)`` linearly in t and taking its root, which removes the leading
dependence on ``M``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .grid import DivergedFieldError, GridSpec, ScalarField
from .sublaplacian import (DIRICHLET, PERIODIC, euler_update, fill_ghosts, pad,
                           stability_timestep)

__all__ = [
    "SolverConfig",
    "TrajectoryRecord",
    "step",
    "run",
    "initial_datum",
    "richardson_lifespan",
    "BLOWUP",
    "HORIZON",
    "INSTABILITY",
]

BLOWUP, HORIZON, INSTABILITY = "blowup", "horizon", "instability"
U0_KINDS = ("compact_bump", "weighted_decay", "constant")


@dataclass(frozen=True)
class SolverConfig:
    p: float
    epsilon: float
    grid: GridSpec = field(default_factory=GridSpec)
    dt_safety: float = 0.4
    blowup_threshold: float | None = None
    t_max: float = 10.0
    boundary: str = DIRICHLET
    u0_kind: str = "compact_bump"
    u0_params: dict = field(default_factory=dict)
    c_nl: float = 0.1
    kappa: float | None = None
    snapshot_times: tuple = ()
    fit_window: float = 1e-2
    record_every: int = 1
    contamination_tol: float = 1e-2

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must lie in (0, 1]")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.boundary not in (DIRICHLET, PERIODIC):
            raise ValueError(f"boundary must be {DIRICHLET!r} or {PERIODIC!r}")
        if self.u0_kind not in U0_KINDS:
            raise ValueError(f"u0_kind must be one of {U0_KINDS}")
        if not self.c_nl > 0:
            raise ValueError("c_nl must be positive")
        if not 0 < self.fit_window < 1:
            raise ValueError("fit_window must lie in (0, 1)")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))

    @property
    def threshold(self) -> float:
        """``M``; defaults to ``1e4 * epsilon`` (data have unit sup norm)."""
        return 1e4 * self.epsilon if self.blowup_threshold is None else float(self.blowup_threshold)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = asdict(self.grid)
        d["blowup_threshold"] = self.threshold
        return d


@dataclass(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    sup_norms: np.ndarray
    masses: np.ndarray
    boundary_max: np.ndarray
    min_values: np.ndarray
    termination: str
    lifespan_estimate: float | None
    weighted_norms: np.ndarray | None = None
    snapshots: dict = field(default_factory=dict)
    contaminated: bool = False
    steps: int = 0
    last_stable_time: float = math.nan
    first_diverged_time: float = math.nan
    u0: ScalarField | None = None
    config: SolverConfig | None = None

    @property
    def max_boundary_ratio(self) -> float:
        s = self.sup_norms
        ok = s > 0
        return float(np.max(self.boundary_max[ok] / s[ok])) if ok.any() else 0.0


# ------------------------------------------------------------ initial data

def _bump(z: np.ndarray) -> np.ndarray:
    """``exp(1 - 1/(1 - z^2))`` on ``|z| < 1``, else 0; equals 1 at 0."""
    out = np.zeros_like(z, dtype=np.float64)
    inside = np.abs(z) < 1
    zz = z[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - zz * zz))
    return out


def initial_datum(kind: str, params: dict | None, grid: GridSpec) -> ScalarField:
    """Named data families, each with sup norm 1.

    ``compact_bump`` (``R0``): ``b(2 r^2 / R0) b(2 tau / R0)`` with the
    standard smooth bump ``b``; supported in ``r^2 + |tau| < R0``.
    ``weighted_decay`` (``kappa``): ``(1 + |eta|_H^2)^(-kappa/2)``.
    ``constant``: all ones.
    """
    params = dict(params or {})
    if kind == "compact_bump":
        R0 = float(params.pop("R0", 1.0))
        if not R0 > 0:
            raise ValueError("R0 must be positive")
        if math.sqrt(R0 / 2) > grid.L_xy or R0 / 2 > grid.L_tau:
            raise ValueError(f"bump support (R0={R0}) exceeds the grid box")
        r2 = grid.radius_squared()
        _, _, tau = grid.coordinates()
        v = _bump(2.0 * r2 / R0) * _bump(np.broadcast_to(2.0 * tau / R0, grid.shape))
    elif kind == "weighted_decay":
        kappa = float(params.pop("kappa", 2.0))
        v = (1.0 + grid.gauge_squared()) ** (-0.5 * kappa)
    elif kind == "constant":
        v = np.ones(grid.shape)
    else:
        raise ValueError(f"unknown initial datum {kind!r}")
    if params:
        raise ValueError(f"unexpected parameters for {kind}: {sorted(params)}")
    return ScalarField(grid, np.array(v, dtype=np.float64), meta={"kind": kind})


# -------------------------------------------------------------- stepping

def _stats(P: np.ndarray, grid: GridSpec):
    """(sup, min, boundary max, mass) of a padded n = 1 or generic array."""
    inner = P[(slice(1, -1),) * P.ndim]
    if P.ndim == 3:
        sup, lo, bmax, total = _kernels.field_stats_h1(P)
        mass = total * grid.cell_volume
        return (sup if math.isfinite(total) else math.nan), lo, bmax, mass
    else:
        a = np.abs(inner)
        sup = float(a.max())
        lo = float(inner.min())
        shell = grid.boundary_mask(1)
        bmax = float(a[shell].max())
    mass = float(np.sum(inner * grid.quadrature_weights()))
    return sup, lo, bmax, mass


def step(u: ScalarField, dt: float, p: float, boundary: str = DIRICHLET,
         nonlinear: bool = True) -> ScalarField:
    """One explicit step ``u + dt (Delta_H u + |u|^p)``.

    Non-finite results come back as a field flagged ``diverged``.
    """
    if u.diverged:
        raise DivergedFieldError("cannot step a diverged field")
    P = pad(u.values, boundary)
    Q = np.zeros_like(P)
    euler_update(P, Q, u.grid, dt, p, nonlinear)
    out = Q[(slice(1, -1),) * Q.ndim].copy()
    if not np.all(np.isfinite(out)):
        return ScalarField(u.grid, out, diverged=True)
    return ScalarField(u.grid, out)


def extrapolate_lifespan(times, sups, p: float, threshold: float, window: float) -> float | None:
    """Root of the linear fit of ``sup^(1-p)`` over records with ``sup >= window * threshold``."""
    times = np.asarray(times)
    sups = np.asarray(sups)
    sel = sups >= window * threshold
    if sel.sum() < 3:
        sel = np.zeros_like(sel)
        sel[-min(3, sel.size):] = True
    if sel.sum() < 2:
        return None
    y = sups[sel] ** (1.0 - p)
    b, a = np.polyfit(times[sel], y, 1)
    if not b < 0:
        return None
    return float(-a / b)


def run(config: SolverConfig, u0: ScalarField | None = None) -> TrajectoryRecord:
    """Integrate ``u(0) = epsilon * u0`` until blow-up, the horizon or instability."""
    grid = config.grid
    if u0 is None:
        u0 = initial_datum(config.u0_kind, config.u0_params, grid)
    elif u0.grid != grid:
        raise ValueError("u0 lives on a different grid than the config")
    p, eps = config.p, config.epsilon
    M = config.threshold
    if M < 100 * eps * u0.sup_norm():
        raise ValueError(f"blowup threshold {M} is below 100 * epsilon * sup|u0|")
    dt_cfl = stability_timestep(grid, config.dt_safety).suggested_dt
    mode = _kernels.pow_mode(p)
    bnd = config.boundary
    P = pad(eps * u0.values, bnd)
    Q = P.copy()
    g2 = grid.gauge_squared() if config.kappa is not None else None
    snaps_pending = list(config.snapshot_times)
    snapshots: dict = {}

    rec_t, rec_s, rec_m, rec_b, rec_lo, rec_w = [], [], [], [], [], []

    def record(t, sup, lo, bmax, mass):
        rec_t.append(t)
        rec_s.append(sup)
        rec_m.append(mass)
        rec_b.append(bmax)
        rec_lo.append(lo)
        if g2 is not None:
            inner = P[(slice(1, -1),) * P.ndim]
            rec_w.append(float(np.max((1.0 + t + g2) ** (0.5 * config.kappa) * np.abs(inner))))

    t = 0.0
    fill_ghosts(P, bnd)
    sup, lo, bmax, mass = _stats(P, grid)
    record(t, sup, lo, bmax, mass)
    while snaps_pending and snaps_pending[0] <= 0.0:
        snapshots[snaps_pending.pop(0)] = ScalarField(grid, eps * u0.values)
    termination = HORIZON
    nsteps = 0
    last_stable = 0.0
    first_div = math.nan
    while True:
        if sup >= M:
            termination = BLOWUP
            first_div = t
            break
        if t >= config.t_max * (1 - 1e-14):
            break
        dt = dt_cfl
        if sup > 0:
            dt = min(dt, config.c_nl * sup ** (1.0 - p))
        stop = config.t_max
        if snaps_pending:
            stop = min(stop, snaps_pending[0])
        if t + dt >= stop * (1 - 1e-14):
            dt = stop - t
        if grid.n == 1:
            _kernels.euler_step_h1(P, Q, grid.xy_axis, grid.xy_axis, grid.h_xy, grid.h_tau,
                                   dt, p, mode, True)
        else:
            euler_update(P, Q, grid, dt, p, True)
        P, Q = Q, P
        fill_ghosts(P, bnd)
        t = stop if dt == stop - t else t + dt
        nsteps += 1
        sup, lo, bmax, mass = _stats(P, grid)
        if not math.isfinite(sup) or not math.isfinite(mass):
            termination = INSTABILITY
            first_div = t
            break
        last_stable = t if sup < M else last_stable
        if nsteps % config.record_every == 0 or sup >= M or t >= config.t_max * (1 - 1e-14) \
                or (snaps_pending and t >= snaps_pending[0]):
            record(t, sup, lo, bmax, mass)
        while snaps_pending and t >= snaps_pending[0] * (1 - 1e-14):
            snapshots[snaps_pending.pop(0)] = ScalarField(grid, P[(slice(1, -1),) * P.ndim].copy())

    times = np.array(rec_t)
    sups = np.array(rec_s)
    T_h = None
    if termination == BLOWUP:
        T_h = extrapolate_lifespan(times, sups, p, M, config.fit_window)
    bnd_arr = np.array(rec_b)
    contaminated = bool(np.any(bnd_arr > config.contamination_tol * sups)) if bnd == DIRICHLET else False
    return TrajectoryRecord(
        times=times, sup_norms=sups, masses=np.array(rec_m), boundary_max=bnd_arr,
        min_values=np.array(rec_lo), termination=termination, lifespan_estimate=T_h,
        weighted_norms=np.array(rec_w) if g2 is not None else None, snapshots=snapshots,
        contaminated=contaminated, steps=nsteps, last_stable_time=last_stable,
        first_diverged_time=first_div, u0=u0, config=config)


def richardson_lifespan(config: SolverConfig, u0: ScalarField | None = None):
    """``(2 T(c/2) - T(c), T(c), T(c/2))`` for the nonlinear step cap ``c = c_nl``.

    Forward Euler overestimates the lifespan by a term linear in ``c``;
    the combination cancels it.
    """
    from dataclasses import replace

    a = run(config, u0).lifespan_estimate
    b = run(replace(config, c_nl=config.c_nl / 2), u0).lifespan_estimate
    if a is None or b is None:
        return None, a, b
    return 2 * b - a, a, b

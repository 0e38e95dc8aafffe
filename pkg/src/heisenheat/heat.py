"""Linear heat flow e^{t Delta_H} by explicit stepping, and the numerical heat kernel.

The kernel is obtained by propagating an approximate identity from the
origin.  Its checks (mass, positivity, dilation scaling, Gaussian envelope,
semigroup law) only use the kernel numerically; no closed form is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog
from scipy.special import erf

from .grid import GridSpec, ScalarField, group_convolve, integrate, interpolate
from .sublaplacian import (DIRICHLET, euler_update, field_stats, fill_ghosts, pad,
                           stability_timestep)

__all__ = [
    "KernelSnapshot",
    "NumericalInstabilityError",
    "delta_init",
    "propagate_linear",
    "propagate_many",
    "heat_kernel",
    "heat_kernels",
    "check_scaling_identity",
    "fit_gaussian_sandwich",
    "check_semigroup",
]

MASS_BAND = (0.9, 1.1)


class NumericalInstabilityError(RuntimeError):
    """Explicit stepping blew up; the message carries the step diagnostics."""


@dataclass(frozen=True, eq=False)
class KernelSnapshot:
    t: float
    field: ScalarField
    mass: float
    min_value: float
    max_value: float
    fitted_c: float = math.nan
    fitted_C: float = math.nan
    intercept_upper: float = math.nan
    intercept_lower: float = math.nan
    usable: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def min_over_max(self) -> float:
        return self.min_value / self.max_value

    @property
    def center_value(self) -> float:
        return self.field.center_value()


def delta_init(grid: GridSpec, mollifier_width: float = 0.0) -> ScalarField:
    """Unit-mass approximate identity at the origin.

    ``mollifier_width == 0`` gives a single node of height 1/cell-volume.
    Otherwise a product Gaussian with standard deviation ``w`` along each
    horizontal axis and the same number of nodes (``w * h_tau / h_xy``) along
    tau, renormalized to unit quadrature mass.
    """
    w = float(mollifier_width)
    if w < 0:
        raise ValueError("mollifier width must be >= 0")
    if w == 0.0:
        v = np.zeros(grid.shape)
        v[grid.center_index] = 1.0 / grid.cell_volume
        return ScalarField(grid, v, meta={"mollifier_width": 0.0})
    wt = w * grid.h_tau / grid.h_xy
    inside = erf(grid.L_xy / (w * math.sqrt(2))) ** (2 * grid.n) * erf(grid.L_tau / (wt * math.sqrt(2)))
    if inside < 0.99:
        raise ValueError(f"mollifier width {w} puts {100 * (1 - inside):.2f}% of the mass outside the box")
    x, y, tau = grid.coordinates()
    e = -(tau ** 2) / (2 * wt * wt)
    for c in list(x) + list(y):
        e = e - c * c / (2 * w * w)
    v = np.broadcast_to(np.exp(e), grid.shape).copy()
    v /= float(np.sum(v * grid.quadrature_weights()))
    return ScalarField(grid, v, meta={"mollifier_width": w})


def _steps(span: float, dt: float) -> tuple[int, float]:
    if span <= 0:
        return 0, 0.0
    k = int(math.ceil(span / dt - 1e-9))
    return k, span / k


def propagate_many(u0: ScalarField, times, dt: float | None = None, safety: float = 0.4,
                   boundary: str = DIRICHLET, growth_limit: float = 10.0) -> list[ScalarField]:
    """``e^{t Delta_H} u0`` for each of the increasing ``times``.

    Each interval between consecutive output times is split into equal steps
    no longer than ``dt`` (default: the stability estimate at ``safety``).
    """
    u0.check_finite()
    grid = u0.grid
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be nonnegative and nondecreasing")
    dt_max = stability_timestep(grid, safety).suggested_dt
    dt = dt_max if dt is None else float(dt)
    if not 0 < dt:
        raise ValueError("dt must be positive")
    P = pad(u0.values, boundary)
    Q = P.copy()
    s0 = max(field_stats(P)[0], 1e-300)
    out, t = [], 0.0
    for target in times:
        k, h = _steps(target - t, dt)
        for i in range(k):
            fill_ghosts(P, boundary)
            euler_update(P, Q, grid, h)
            P, Q = Q, P
            if (i & 63) == 63 or i == k - 1:
                sup = field_stats(P)[0]
                if not sup <= growth_limit * s0:
                    raise NumericalInstabilityError(
                        f"linear flow grew from {s0:.3e} to {sup:.3e} at t={t + (i + 1) * h:.6g} "
                        f"(dt={h:.3e}, stable estimate {dt_max:.3e})")
        t = target
        out.append(ScalarField(grid, P[(slice(1, -1),) * P.ndim].copy(), meta={"t": t}))
    return out


def propagate_linear(u0: ScalarField, t_final: float, dt: float | None = None, **kw) -> ScalarField:
    if t_final == 0:
        return u0
    return propagate_many(u0, [t_final], dt, **kw)[0]


def _snapshot(t: float, f: ScalarField, fit: bool) -> KernelSnapshot:
    mass = integrate(f)
    snap = KernelSnapshot(t=t, field=f, mass=mass, min_value=float(f.values.min()),
                          max_value=float(f.values.max()),
                          usable=MASS_BAND[0] <= mass <= MASS_BAND[1])
    if fit and snap.usable:
        try:
            c, C, a_up, a_lo = fit_gaussian_sandwich(snap, full=True)
            snap = replace(snap, fitted_c=c, fitted_C=C, intercept_upper=a_up, intercept_lower=a_lo)
        except ValueError:
            pass
    return snap


def heat_kernels(times, grid: GridSpec, dt: float | None = None, mollifier_width: float | None = None,
                 safety: float = 0.4, fit: bool = True) -> list[KernelSnapshot]:
    """Kernel snapshots at several times from a single propagation."""
    if any(t <= 0 for t in times):
        raise ValueError("kernel times must be positive")
    w = 0.0 if mollifier_width is None else mollifier_width
    fields = propagate_many(delta_init(grid, w), sorted(times), dt, safety)
    by_t = dict(zip(sorted(times), fields))
    return [_snapshot(float(t), by_t[t], fit) for t in times]


def heat_kernel(t: float, grid: GridSpec, dt: float | None = None, mollifier_width: float | None = None,
                safety: float = 0.4, fit: bool = True) -> KernelSnapshot:
    return heat_kernels([t], grid, dt, mollifier_width, safety, fit)[0]


def check_scaling_identity(k_t: KernelSnapshot, k_1: KernelSnapshot, rel_floor: float = 1e-4) -> float:
    """Max relative deviation from ``h_t(xi) = t^{-Q/2} h_1(delta_{t^{-1/2}} xi)``.

    Only nodes where both sides exceed ``rel_floor`` of their peaks and whose
    dilated image lies in the box are compared.  ``k_1`` may be any reference
    time ``s``; the identity is then applied with ratio ``t/s``.
    """
    g = k_t.field.grid
    if k_1.field.grid != g:
        raise ValueError("snapshots live on different grids")
    lam = math.sqrt(k_1.t / k_t.t)
    x, y, tau = g.coordinates()
    xd = [np.broadcast_to(lam * c, g.shape) for c in x]
    yd = [np.broadcast_to(lam * c, g.shape) for c in y]
    td = np.broadcast_to(lam * lam * tau, g.shape)
    inside = np.ones(g.shape, dtype=bool)
    for c in xd + yd:
        inside &= np.abs(c) <= g.L_xy * (1 + 1e-12)
    inside &= np.abs(td) <= g.L_tau * (1 + 1e-12)
    lhs = k_t.field.values
    keep = inside & (lhs > rel_floor * lhs.max())
    rhs = lam ** g.Q * interpolate(k_1.field, np.array([c[keep] for c in xd]),
                                   np.array([c[keep] for c in yd]), td[keep])
    peak = lam ** g.Q * k_1.field.values.max()
    ok = rhs > rel_floor * peak
    if not np.any(ok):
        raise ValueError("no admissible nodes for the scaling comparison")
    return float(np.max(np.abs(lhs[keep][ok] - rhs[ok]) / rhs[ok]))


def _envelope(X: np.ndarray, Y: np.ndarray, upper: bool, anchor: float | None = None):
    """One-sided least-deviation line ``a + b X`` above (or below) all points.

    Minimizes the total gap subject to the one-sided constraint.  With
    ``anchor`` the intercept is fixed and only the slope is fitted.
    Returns ``(a, b)``.
    """
    sign = 1.0 if upper else -1.0
    m = X.size
    if anchor is None:
        cost = sign * np.array([m, X.sum()])
        A = -sign * np.column_stack([np.ones(m), X])
        bounds = [(None, None), (None, None)]
        rhs = -sign * Y
    else:
        cost = [sign * X.sum()]
        A = -sign * X[:, None]
        bounds = [(None, None)]
        rhs = sign * (anchor - Y)
    res = linprog(cost, A_ub=A, b_ub=rhs, bounds=bounds, method="highs")
    if not res.success:
        raise ValueError(f"envelope fit failed: {res.message}")
    if anchor is None:
        return float(res.x[0]), float(res.x[1])
    return float(anchor), float(res.x[0])


def fit_gaussian_sandwich(k: KernelSnapshot, rel_floor: float = 1e-5, full: bool = False):
    """One-sided envelope fits of ``log(t^{Q/2} h_t)`` against ``X = -|eta|^2/t``.

    The upper envelope (slope ``c``) has a free intercept.  The lower one
    (slope ``C``) is pinned at the origin value: a free lower line would be
    dragged flat by the many nodes sitting just above the admissibility
    floor.  Returns ``(c, C)``, plus the two intercepts with ``full``.
    """
    f = k.field
    g = f.grid
    v = f.values
    keep = v > rel_floor * v.max()
    if keep.sum() < 50:
        raise ValueError(f"only {int(keep.sum())} admissible nodes (need 50)")
    X = -g.gauge_squared()[keep] / k.t
    Y = np.log(k.t ** (g.Q / 2) * v[keep])
    a_up, c = _envelope(X, Y, upper=True)
    a_lo, C = _envelope(X, Y, upper=False, anchor=math.log(k.t ** (g.Q / 2) * f.center_value()))
    return (c, C, a_up, a_lo) if full else (c, C)


def central_mass_mask(f: ScalarField, fraction: float = 0.5) -> np.ndarray:
    """Nodes of largest value that together carry ``fraction`` of the mass."""
    v = f.values
    w = f.grid.quadrature_weights()
    order = np.argsort(v, axis=None)[::-1]
    cum = np.cumsum((v * w).ravel()[order])
    total = cum[-1]
    cut = int(np.searchsorted(cum, fraction * total)) + 1
    mask = np.zeros(v.size, dtype=bool)
    mask[order[:cut]] = True
    return mask.reshape(v.shape)


def check_semigroup(k_s: KernelSnapshot, k_t: KernelSnapshot, k_st: KernelSnapshot,
                    truncation_rel: float = 1e-8) -> float:
    """Max relative deviation of ``h_s * h_t`` from ``h_{s+t}`` on the central 50%-mass region."""
    g = k_st.field.grid
    if k_s.field.grid != g or k_t.field.grid != g:
        raise ValueError("snapshots live on different grids")
    mask = central_mass_mask(k_st.field)
    conv = group_convolve(k_s.field, k_t.field, truncation_rel=truncation_rel, mask=mask)
    ref = k_st.field.values[mask]
    return float(np.max(np.abs(conv.values[mask] - ref) / ref))

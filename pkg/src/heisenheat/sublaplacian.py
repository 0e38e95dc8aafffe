"""Finite differences for the sub-Laplacian and the horizontal vector fields.

The production operator uses the expanded-coefficient form

    Delta_H = Delta_xy + 4 |(x, y)|^2 d_tau^2 + 4 sum_j (y_j d_{x_j tau} - x_j d_{y_j tau})

with second-order central differences and a four-point cross stencil for
the mixed terms.  Nodes outside the box are treated as zero ("ghost
outside"), so boundary nodes are updated like every other node and the
boundary-shell value stays a meaningful contamination monitor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import GridSpec, ScalarField

__all__ = [
    "StencilReport",
    "apply_sublaplacian",
    "apply_vector_field",
    "sum_of_squares_apply",
    "stability_timestep",
    "row_sum_bound",
]

DIRICHLET = "dirichlet"
PERIODIC = "periodic"


@dataclass(frozen=True)
class StencilReport:
    max_abs_row_sum: float
    suggested_dt: float
    safety: float
    spectral_radius: float | None = None

    def __post_init__(self):
        if not (self.suggested_dt > 0):
            raise ValueError("suggested_dt must be positive")


# ----------------------------------------------------------------- padding

def pad(values: np.ndarray, boundary: str = DIRICHLET, width: int = 1) -> np.ndarray:
    if boundary == DIRICHLET:
        return np.pad(values, width)
    if boundary == PERIODIC:
        return np.pad(values, width, mode="wrap")
    raise ValueError(f"unknown boundary mode {boundary!r}")


def _window(P: np.ndarray, offsets: dict, width: int = 1) -> np.ndarray:
    """View of the padded array shifted by ``offsets`` (axis -> step)."""
    idx = []
    for ax, N in enumerate(P.shape):
        o = offsets.get(ax, 0)
        idx.append(slice(width + o, N - width + o))
    return P[tuple(idx)]


def _node_coords(grid: GridSpec):
    x, y, _ = grid.coordinates()
    return x, y


def _check_grid(grid: GridSpec) -> None:
    if min(grid.shape) < 5:
        raise ValueError("grid too small: need at least 5 nodes per axis")


def _lap_generic(P: np.ndarray, grid: GridSpec) -> np.ndarray:
    n = grid.n
    hx, ht = grid.h_xy, grid.h_tau
    ta = 2 * n
    c = _window(P, {})
    out = np.zeros(grid.shape)
    for a in range(2 * n):
        out += (_window(P, {a: 1}) + _window(P, {a: -1}) - 2.0 * c) / hx**2
    r2 = grid.radius_squared()
    out += 4.0 * r2 * (_window(P, {ta: 1}) - 2.0 * c + _window(P, {ta: -1})) / ht**2
    x, y = _node_coords(grid)
    for j in range(n):
        for a, coef in ((j, y[j]), (n + j, -x[j])):
            cross = (_window(P, {a: 1, ta: 1}) - _window(P, {a: 1, ta: -1})
                     - _window(P, {a: -1, ta: 1}) + _window(P, {a: -1, ta: -1}))
            out += coef * cross / (hx * ht)
    return out


def laplacian_padded(P: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Sub-Laplacian on the interior of a padded array (one ghost layer)."""
    if grid.n == 1:
        out = np.empty(grid.shape)
        _kernels.sublaplacian_h1(P, out, grid.xy_axis, grid.xy_axis, grid.h_xy, grid.h_tau)
        return out
    return _lap_generic(P, grid)


def apply_sublaplacian(u: ScalarField, boundary: str = DIRICHLET) -> ScalarField:
    u.check_finite()
    _check_grid(u.grid)
    return u.with_values(laplacian_padded(pad(u.values, boundary), u.grid))


# ----------------------------------------------------------- vector fields

def _parse_field(which, n: int):
    """Accept ``("X", j)`` / ``("Y", j)`` or strings like ``"X1"`` (1-based)."""
    if isinstance(which, str):
        kind, j = which[:1].upper(), which[1:]
        try:
            j = int(j) - 1
        except ValueError:
            raise ValueError(f"invalid vector field {which!r}") from None
    else:
        kind, j = which
        kind = str(kind).upper()
        j = int(j)
    if kind not in ("X", "Y") or not 0 <= j < n:
        raise ValueError(f"invalid vector field {which!r} for n={n}")
    return kind, j


def _vector_field_values(values: np.ndarray, grid: GridSpec, kind: str, j: int,
                         boundary: str) -> np.ndarray:
    n = grid.n
    P = pad(values, boundary)
    ta = 2 * n
    x, y = _node_coords(grid)
    d_tau = (_window(P, {ta: 1}) - _window(P, {ta: -1})) / (2.0 * grid.h_tau)
    if kind == "X":
        a, coef = j, 2.0 * y[j]
    else:
        a, coef = n + j, -2.0 * x[j]
    d_a = (_window(P, {a: 1}) - _window(P, {a: -1})) / (2.0 * grid.h_xy)
    return d_a + coef * d_tau


def apply_vector_field(u: ScalarField, which, boundary: str = DIRICHLET) -> ScalarField:
    """``X_j = d_{x_j} + 2 y_j d_tau`` or ``Y_j = d_{y_j} - 2 x_j d_tau`` by central differences."""
    u.check_finite()
    _check_grid(u.grid)
    kind, j = _parse_field(which, u.grid.n)
    return u.with_values(_vector_field_values(u.values, u.grid, kind, j, boundary))


def sum_of_squares_apply(u: ScalarField, boundary: str = DIRICHLET) -> ScalarField:
    """Cross-check form ``sum_j X_j^2 + Y_j^2``; valid two nodes in from the boundary."""
    u.check_finite()
    _check_grid(u.grid)
    out = np.zeros(u.grid.shape)
    for j in range(u.grid.n):
        for kind in ("X", "Y"):
            first = _vector_field_values(u.values, u.grid, kind, j, boundary)
            out += _vector_field_values(first, u.grid, kind, j, boundary)
    return u.with_values(out)


# --------------------------------------------------------------- stability

def row_sum_bound(grid: GridSpec) -> float:
    """Diagonal magnitude plus the mixed-stencil weight at the box corner.

    The full absolute row sum is at most ``2 * diag + cross``, so
    ``1 / (diag + cross)`` never exceeds the explicit-Euler limit ``2 / rho``.
    """
    n = grid.n
    hx, ht = grid.h_xy, grid.h_tau
    r2_max = 2 * n * grid.L_xy ** 2
    diag = 2.0 * 2 * n / hx**2 + 8.0 * r2_max / ht**2
    cross = sum(4.0 * 2.0 * grid.L_xy / (hx * ht) for _ in range(n))
    return diag + cross


def _spectral_radius(grid: GridSpec, iters: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(grid.shape)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = laplacian_padded(pad(v), grid)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            break
        v = w / lam
    return lam


def stability_timestep(grid: GridSpec, safety: float = 0.4, power_iterations: int = 0,
                       seed: int = 0) -> StencilReport:
    """Explicit-Euler step from the row-sum bound, optionally with a power-iteration estimate.

    The discrete operator is symmetric and negative semi-definite, so forward
    Euler is stable for ``dt * rho <= 2`` and any ``safety <= 1`` qualifies.
    """
    if not 0 < safety <= 1:
        raise ValueError(f"safety must lie in (0, 1], got {safety!r}")
    bound = row_sum_bound(grid)
    rho = _spectral_radius(grid, power_iterations, seed) if power_iterations > 0 else None
    return StencilReport(max_abs_row_sum=bound, suggested_dt=safety / bound,
                         safety=safety, spectral_radius=rho)


# ------------------------------------------------------------ time stepping

def fill_ghosts(P: np.ndarray, boundary: str) -> None:
    """Refresh the ghost layer in place (periodic only; Dirichlet ghosts stay 0)."""
    if boundary == PERIODIC:
        if P.ndim == 3:
            _kernels.wrap_ghosts_h1(P)
        else:
            P[...] = np.pad(P[(slice(1, -1),) * P.ndim], 1, mode="wrap")


def euler_update(P: np.ndarray, Pnew: np.ndarray, grid: GridSpec, dt: float,
                 p: float = 1.0, nonlinear: bool = False) -> None:
    """``Pnew = P + dt (Delta_H P [+ |P|^p])`` on the interior of padded arrays."""
    if grid.n == 1:
        _kernels.euler_step_h1(P, Pnew, grid.xy_axis, grid.xy_axis, grid.h_xy, grid.h_tau,
                               dt, p, _kernels.pow_mode(p), nonlinear)
        return
    inner = (slice(1, -1),) * P.ndim
    c = P[inner]
    rhs = _lap_generic(P, grid)
    if nonlinear:
        rhs += np.abs(c) ** p
    Pnew[inner] = c + dt * rhs


def field_stats(P: np.ndarray):
    """``(sup |u|, min u, max |u| on the boundary shell)`` of a padded array."""
    if P.ndim == 3:
        sup, lo, bmax, total = _kernels.field_stats_h1(P)
        return (sup if np.isfinite(total) else float("nan")), lo, bmax
    inner = P[(slice(1, -1),) * P.ndim]
    shell = np.ones(inner.shape, dtype=bool)
    shell[(slice(1, -1),) * P.ndim] = False
    a = np.abs(inner)
    sup = float(a.max()) if np.all(np.isfinite(a)) else float("nan")
    return sup, float(inner.min()), float(a[shell].max())

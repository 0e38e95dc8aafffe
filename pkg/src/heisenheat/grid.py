"""Anisotropic node lattices over (x, y, tau) and scalar fields living on them.

A :class:`GridSpec` is the box ``[-L_xy, L_xy]^{2n} x [-L_tau, L_tau]``
sampled at ``N_xy`` nodes per horizontal axis and ``N_tau`` nodes along
tau.  Field values are stored as an array of shape
``(N_xy,) * 2n + (N_tau,)`` with axis order ``x_1..x_n, y_1..y_n, tau``.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .group import GroupPoint, gauge_arrays
from . import _kernels

__all__ = [
    "GridSpec",
    "ScalarField",
    "DivergedFieldError",
    "sample",
    "integrate",
    "weighted_sup_norm",
    "group_convolve",
    "interpolate",
    "write_hfield",
    "read_hfield",
]

HFIELD_SUFFIX = ".hfield"


class DivergedFieldError(ValueError):
    """Raised when an operation receives a field flagged as diverged."""


class GridAnisotropyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GridSpec:
    n: int = 1
    L_xy: float = 4.0
    L_tau: float = 16.0
    N_xy: int = 65
    N_tau: int = 65

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        for name in ("N_xy", "N_tau"):
            N = getattr(self, name)
            if int(N) != N or N < 5 or N % 2 == 0:
                raise ValueError(f"{name} must be an odd integer >= 5, got {N!r}")
        for name in ("L_xy", "L_tau"):
            L = getattr(self, name)
            if not (np.isfinite(L) and L > 0):
                raise ValueError(f"{name} must be positive, got {L!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "N_xy", int(self.N_xy))
        object.__setattr__(self, "N_tau", int(self.N_tau))
        object.__setattr__(self, "L_xy", float(self.L_xy))
        object.__setattr__(self, "L_tau", float(self.L_tau))
        if self.L_tau < self.L_xy ** 2:
            warnings.warn(
                f"L_tau={self.L_tau} < L_xy**2={self.L_xy ** 2}: box is not matched to the "
                "anisotropic dilations", GridAnisotropyWarning, stacklevel=3)

    @property
    def h_xy(self) -> float:
        return 2.0 * self.L_xy / (self.N_xy - 1)

    @property
    def h_tau(self) -> float:
        return 2.0 * self.L_tau / (self.N_tau - 1)

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    @property
    def shape(self) -> tuple:
        return (self.N_xy,) * (2 * self.n) + (self.N_tau,)

    @property
    def size(self) -> int:
        return self.N_xy ** (2 * self.n) * self.N_tau

    @property
    def cell_volume(self) -> float:
        return self.h_xy ** (2 * self.n) * self.h_tau

    @property
    def box_volume(self) -> float:
        return (2.0 * self.L_xy) ** (2 * self.n) * (2.0 * self.L_tau)

    @property
    def center_index(self) -> tuple:
        return (self.N_xy // 2,) * (2 * self.n) + (self.N_tau // 2,)

    @property
    def xy_axis(self) -> np.ndarray:
        # built from the center so the origin node is exactly 0
        return (np.arange(self.N_xy) - self.N_xy // 2) * self.h_xy

    @property
    def tau_axis(self) -> np.ndarray:
        return (np.arange(self.N_tau) - self.N_tau // 2) * self.h_tau

    def coordinates(self):
        """Broadcastable ``(x, y, tau)``; ``x`` and ``y`` have a leading axis of length n."""
        d = 2 * self.n + 1
        a = self.xy_axis
        xs, ys = [], []
        for j in range(2 * self.n):
            shp = [1] * d
            shp[j] = self.N_xy
            (xs if j < self.n else ys).append(a.reshape(shp))
        shp = [1] * d
        shp[-1] = self.N_tau
        tau = self.tau_axis.reshape(shp)
        return np.broadcast_arrays(*xs), np.broadcast_arrays(*ys), tau

    @cached_property
    def _gauge_sq(self) -> np.ndarray:
        x, y, tau = self.coordinates()
        g = gauge_arrays(np.array(x), np.array(y), tau)
        g = np.broadcast_to(g * g, self.shape).copy()
        g.flags.writeable = False
        return g

    def gauge_squared(self) -> np.ndarray:
        return self._gauge_sq

    @cached_property
    def _radius_sq(self) -> np.ndarray:
        x, y, _ = self.coordinates()
        r2 = sum(c * c for c in x) + sum(c * c for c in y)
        r2 = np.broadcast_to(r2, self.shape).copy()
        r2.flags.writeable = False
        return r2

    def radius_squared(self) -> np.ndarray:
        """``|x|^2 + |y|^2`` at every node."""
        return self._radius_sq

    @cached_property
    def _weights(self) -> np.ndarray:
        # trapezoid: interior nodes carry the full cell volume, faces half of it
        w1 = np.ones(self.N_xy)
        w1[[0, -1]] = 0.5
        wt = np.ones(self.N_tau)
        wt[[0, -1]] = 0.5
        w = np.ones(self.shape)
        d = 2 * self.n + 1
        for j in range(2 * self.n):
            shp = [1] * d
            shp[j] = self.N_xy
            w = w * w1.reshape(shp)
        w = w * wt.reshape([1] * (d - 1) + [self.N_tau])
        w *= self.cell_volume
        w.flags.writeable = False
        return w

    def quadrature_weights(self) -> np.ndarray:
        return self._weights

    def boundary_mask(self, width: int = 1) -> np.ndarray:
        """True on the outer shell of ``width`` nodes."""
        m = np.zeros(self.shape, dtype=bool)
        for ax, N in enumerate(self.shape):
            idx = [slice(None)] * len(self.shape)
            idx[ax] = np.r_[0:width, N - width:N]
            m[tuple(idx)] = True
        return m

    def node(self, index) -> GroupPoint:
        index = tuple(int(i) for i in index)
        a = self.xy_axis
        return GroupPoint([a[i] for i in index[:self.n]],
                          [a[i] for i in index[self.n:2 * self.n]],
                          self.tau_axis[index[-1]])

    def index_of(self, point: GroupPoint) -> tuple:
        """Index of the node equal to ``point`` (rounded to the lattice)."""
        coords = point.as_array()
        idx = [int(round((c + self.L_xy) / self.h_xy)) for c in coords[:-1]]
        idx.append(int(round((coords[-1] + self.L_tau) / self.h_tau)))
        for i, N in zip(idx, self.shape):
            if not 0 <= i < N:
                raise ValueError(f"point {point!r} lies outside the grid box")
        return tuple(idx)

    def refined(self) -> "GridSpec":
        """Same box with every spacing halved."""
        return GridSpec(self.n, self.L_xy, self.L_tau, 2 * self.N_xy - 1, 2 * self.N_tau - 1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray
    diverged: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid shape {self.grid.shape}")
        if not self.diverged and not np.all(np.isfinite(v)):
            raise ValueError("non-finite values in a field not flagged as diverged")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def check_finite(self) -> None:
        if self.diverged:
            raise DivergedFieldError("field is flagged as diverged")

    def center_value(self) -> float:
        return float(self.values[self.grid.center_index])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, a):
        return self.with_values(self.values * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _check_same_grid(a: ScalarField, b: ScalarField) -> None:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def sample(f, grid: GridSpec, vectorized: bool = False) -> ScalarField:
    """Evaluate ``f`` at every node.

    ``f`` takes a :class:`GroupPoint`; with ``vectorized=True`` it instead
    receives the broadcast coordinate arrays ``(x, y, tau)`` of
    :meth:`GridSpec.coordinates` and returns an array.
    """
    if vectorized:
        x, y, tau = grid.coordinates()
        vals = np.broadcast_to(np.asarray(f(np.array(x), np.array(y), tau), dtype=np.float64),
                               grid.shape).copy()
    else:
        vals = np.empty(grid.shape)
        for idx in np.ndindex(*grid.shape):
            vals[idx] = f(grid.node(idx))
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"sampled function is not finite at node {grid.node(idx)!r}")
    return ScalarField(grid, vals)


def integrate(u: ScalarField) -> float:
    u.check_finite()
    return float(np.sum(u.values * u.grid.quadrature_weights()))


def weighted_sup_norm(u: ScalarField, t: float, kappa: float) -> float:
    """``max (1 + t + |eta|^2)^(kappa/2) |u(eta)|`` over the grid."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t!r}")
    u.check_finite()
    w = (1.0 + t + u.grid.gauge_squared()) ** (0.5 * kappa)
    return float(np.max(w * np.abs(u.values)))


def interpolate(u: ScalarField, x, y, tau) -> np.ndarray:
    """Multilinear interpolation of ``u`` at arbitrary points; zero outside the box.

    ``x`` and ``y`` have a leading axis of length n, as in
    :meth:`GridSpec.coordinates`.
    """
    from scipy.interpolate import RegularGridInterpolator

    g = u.grid
    axes = [g.xy_axis] * (2 * g.n) + [g.tau_axis]
    interp = RegularGridInterpolator(axes, u.values, method="linear",
                                     bounds_error=False, fill_value=0.0)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    shape = np.broadcast_shapes(x.shape[1:], y.shape[1:], tau.shape)
    pts = [np.broadcast_to(c, shape) for c in x] + [np.broadcast_to(c, shape) for c in y]
    pts.append(np.broadcast_to(tau, shape))
    pts = np.stack([p.ravel() for p in pts], axis=-1)
    return interp(pts).reshape(shape)


def group_convolve(v: ScalarField, h: ScalarField, truncation_rel: float = 0.0,
                   mask: np.ndarray | None = None) -> ScalarField:
    """Quadrature of ``(v * h)(eta) = integral of v(eta o zeta^-1) h(zeta) dzeta``.

    ``eta o zeta^-1`` always lands on lattice values in (x, y); only its tau
    coordinate is off-grid, so the interpolation is linear along tau, with
    zero outside the box.  Kernel nodes where ``|h| < truncation_rel *
    max|h|`` are skipped.  With ``mask`` only the selected output nodes are
    computed (others are zero).
    """
    _check_same_grid(v, h)
    v.check_finite()
    h.check_finite()
    if not 0.0 <= truncation_rel < 1.0:
        raise ValueError("truncation_rel must lie in [0, 1)")
    g = v.grid
    hw = h.values * g.quadrature_weights()
    keep = np.abs(h.values) >= truncation_rel * np.max(np.abs(h.values))
    keep &= hw != 0.0
    kidx = np.argwhere(keep).astype(np.int64)
    kval = hw[keep].astype(np.float64)
    if mask is None:
        mask = np.ones(g.shape, dtype=bool)
    elif mask.shape != g.shape:
        raise ValueError("mask shape does not match grid")
    if g.n == 1:
        out = _kernels.group_convolve_h1(v.values, kidx, kval, mask,
                                         g.L_xy, g.L_tau, g.h_xy, g.h_tau)
    else:
        out = _group_convolve_generic(v.values, kidx, kval, mask, g)
    return ScalarField(g, out)


def _group_convolve_generic(vals, kidx, kval, mask, g: GridSpec) -> np.ndarray:
    n = g.n
    Nxy, Nt = g.N_xy, g.N_tau
    c = Nxy // 2
    out = np.zeros(g.shape)
    x, y, _ = g.coordinates()
    x = np.array(x)
    y = np.array(y)
    tau_axis = g.tau_axis
    for ki, w in zip(kidx, kval):
        off = ki[:2 * n] - c
        xp = g.xy_axis[ki[:n]]
        yp = g.xy_axis[ki[n:2 * n]]
        tp = tau_axis[ki[-1]]
        # source = eta o zeta^-1 = (x - x', y - y', tau - tau' + 2 (x'.y - x.y'))
        src = [slice(None)] * (2 * n + 1)
        dst = [slice(None)] * (2 * n + 1)
        ok = True
        for ax in range(2 * n):
            o = int(off[ax])
            if abs(o) >= Nxy:
                ok = False
                break
            if o >= 0:
                dst[ax] = slice(o, Nxy)
                src[ax] = slice(0, Nxy - o)
            else:
                dst[ax] = slice(0, Nxy + o)
                src[ax] = slice(-o, Nxy)
        if not ok:
            continue
        dst = tuple(dst)
        xs = x[(slice(None),) + dst]
        ys = y[(slice(None),) + dst]
        twist = 2.0 * (np.tensordot(xp, ys, axes=(0, 0)) - np.tensordot(yp, xs, axes=(0, 0)))
        tsrc = tau_axis.reshape([1] * (2 * n) + [Nt]) - tp + twist
        fi = tsrc / g.h_tau + Nt // 2
        i0 = np.floor(fi).astype(np.int64)
        fr = fi - i0
        vs = vals[tuple(src[:2 * n]) + (slice(None),)]
        # gather along tau with zero fill
        shape = np.broadcast_shapes(vs.shape, fi.shape)
        i0 = np.broadcast_to(i0, shape)
        fr = np.broadcast_to(fr, shape)
        vsb = np.broadcast_to(vs, shape)
        lo_ok = (i0 >= 0) & (i0 < Nt)
        hi_ok = (i0 + 1 >= 0) & (i0 + 1 < Nt)
        lo = np.where(lo_ok, np.take_along_axis(vsb, np.clip(i0, 0, Nt - 1), axis=-1), 0.0)
        hi = np.where(hi_ok, np.take_along_axis(vsb, np.clip(i0 + 1, 0, Nt - 1), axis=-1), 0.0)
        out[dst] += w * ((1.0 - fr) * lo + fr * hi)
    out[~mask] = 0.0
    return out


def write_hfield(u: ScalarField, path) -> Path:
    """Binary snapshot: little-endian header ``n, N_xy, N_tau`` (int64),
    ``L_xy, L_tau`` (float64), then row-major float64 values."""
    path = Path(path)
    if path.suffix != HFIELD_SUFFIX:
        path = path.with_suffix(HFIELD_SUFFIX)
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qqqdd", g.n, g.N_xy, g.N_tau, g.L_xy, g.L_tau))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes(order="C"))
    return path


def read_hfield(path) -> ScalarField:
    with open(path, "rb") as fh:
        header = fh.read(40)
        if len(header) != 40:
            raise ValueError(f"{path}: truncated .hfield header")
        n, N_xy, N_tau, L_xy, L_tau = struct.unpack("<qqqdd", header)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridAnisotropyWarning)
            grid = GridSpec(n, L_xy, L_tau, N_xy, N_tau)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {data.size}")
    vals = data.reshape(grid.shape).astype(np.float64)
    return ScalarField(grid, vals, diverged=not np.all(np.isfinite(vals)))

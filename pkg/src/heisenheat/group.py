"""Group algebra of the Heisenberg group H_n = R^n x R^n x R.

Points are ``(x, y, tau)`` with the twisted product

    (x, y, tau) o (x', y', tau') = (x + x', y + y', tau + tau' + 2 (x.y' - x'.y)).

Besides the :class:`GroupPoint` value type, this module exposes array
versions of the product and the gauge (``compose_arrays``, ``gauge_arrays``)
which the grid and convolution code use on whole meshes at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GroupPoint",
    "GroupParams",
    "identity",
    "compose",
    "inverse",
    "gauge",
    "distance",
    "dilate",
    "fujita_exponent",
    "compose_arrays",
    "gauge_arrays",
]


@dataclass(frozen=True)
class GroupPoint:
    """An element ``(x, y, tau)`` of H_n; ``x`` and ``y`` have length n."""

    x: np.ndarray
    y: np.ndarray
    tau: float

    def __init__(self, x, y, tau):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64)).copy()
        y = np.atleast_1d(np.asarray(y, dtype=np.float64)).copy()
        if x.ndim != 1 or y.ndim != 1:
            raise ValueError("x and y must be 1-D vectors")
        if x.shape != y.shape:
            raise ValueError(f"x and y must have equal length, got {x.size} and {y.size}")
        if x.size < 1:
            raise ValueError("Heisenberg index n must be >= 1")
        tau = float(tau)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.isfinite(tau)):
            raise ValueError("GroupPoint components must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def from_coords(cls, coords) -> "GroupPoint":
        """Build from a flat sequence ``(x_1..x_n, y_1..y_n, tau)``."""
        coords = np.asarray(coords, dtype=np.float64).ravel()
        if coords.size < 3 or coords.size % 2 == 0:
            raise ValueError("flat coordinates must have odd length 2n + 1 >= 3")
        n = (coords.size - 1) // 2
        return cls(coords[:n], coords[n:2 * n], coords[-1])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, [self.tau]])

    def __iter__(self):
        return iter(self.as_array())

    def __eq__(self, other):
        if not isinstance(other, GroupPoint):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y) and self.tau == other.tau)

    def __hash__(self):
        return hash((self.x.tobytes(), self.y.tobytes(), self.tau))

    def isclose(self, other: "GroupPoint", rtol=1e-12, atol=1e-12) -> bool:
        _check_same_n(self, other)
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=rtol, atol=atol))

    def __repr__(self):
        return f"GroupPoint(x={self.x.tolist()}, y={self.y.tolist()}, tau={self.tau!r})"


@dataclass(frozen=True)
class GroupParams:
    """Heisenberg index ``n`` and homogeneous dimension ``Q = 2n + 2``."""

    n: int = 1
    Q: int = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "Q", 2 * int(self.n) + 2)


def _check_same_n(a: GroupPoint, b: GroupPoint) -> None:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: n={a.n} vs n={b.n}")


def identity(n: int = 1) -> GroupPoint:
    return GroupPoint(np.zeros(n), np.zeros(n), 0.0)


def compose(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    _check_same_n(a, b)
    tau = a.tau + b.tau + 2.0 * (float(a.x @ b.y) - float(b.x @ a.y))
    return GroupPoint(a.x + b.x, a.y + b.y, tau)


def inverse(a: GroupPoint) -> GroupPoint:
    return GroupPoint(-a.x, -a.y, -a.tau)


def gauge(a: GroupPoint) -> float:
    """Homogeneous norm ``((|x|^2 + |y|^2)^2 + tau^2)^(1/4)``."""
    r2 = float(a.x @ a.x + a.y @ a.y)
    return float((r2 * r2 + a.tau * a.tau) ** 0.25)


def distance(a: GroupPoint, b: GroupPoint) -> float:
    """Left-invariant distance ``|b^-1 o a|``."""
    return gauge(compose(inverse(b), a))


def dilate(r: float, a: GroupPoint) -> GroupPoint:
    if not r > 0:
        raise ValueError(f"dilation factor must be positive, got {r!r}")
    return GroupPoint(r * a.x, r * a.y, r * r * a.tau)


def fujita_exponent(params: GroupParams | int) -> float:
    if not isinstance(params, GroupParams):
        params = GroupParams(params)
    return 1.0 + 2.0 / params.Q


def compose_arrays(x1, y1, t1, x2, y2, t2):
    """Broadcasting group product on coordinate arrays.

    ``x*`` and ``y*`` carry the n components on the leading axis (shape
    ``(n, ...)``); ``t*`` has the trailing shape only.
    """
    x1, y1, x2, y2 = (np.asarray(v, dtype=np.float64) for v in (x1, y1, x2, y2))
    twist = 2.0 * (np.sum(x1 * y2, axis=0) - np.sum(x2 * y1, axis=0))
    return x1 + x2, y1 + y2, np.asarray(t1) + np.asarray(t2) + twist


def gauge_arrays(x, y, tau):
    """Gauge on coordinate arrays laid out as in :func:`compose_arrays`."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r2 = np.sum(x * x, axis=0) + np.sum(y * y, axis=0)
    return np.sqrt(np.sqrt(r2 * r2 + np.asarray(tau) ** 2))

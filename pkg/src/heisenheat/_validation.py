"""Argument checks shared by the config loader, the solver and the sweep."""
from __future__ import annotations

import math

import numpy as np


def check_exponent(p) -> float:
    p = float(p)
    if not p > 1:
        raise ValueError("p must exceed 1")
    return p


def check_positive(name: str, value, allow_zero: bool = False) -> float:
    v = float(value)
    ok = v >= 0 if allow_zero else v > 0
    if not (ok and math.isfinite(v)):
        raise ValueError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}, got {value!r}")
    return v


def check_odd_nodes(name: str, value, minimum: int = 5) -> int:
    v = int(value)
    if v != value or v < minimum or v % 2 == 0:
        raise ValueError(f"{name} must be an odd integer >= {minimum}, got {value!r}")
    return v


def check_fit_arrays(eps, T) -> tuple[np.ndarray, np.ndarray]:
    """Positive finite 1-D arrays of equal length, at least three points."""
    eps = np.asarray(eps, dtype=np.float64).ravel()
    T = np.asarray(T, dtype=np.float64).ravel()
    if eps.shape != T.shape:
        raise ValueError(f"eps and T have different lengths ({eps.size} vs {T.size})")
    if eps.size < 3:
        raise ValueError("need at least 3 points to fit a scaling law")
    if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(T))):
        raise ValueError("eps and T must be finite")
    if np.any(eps <= 0) or np.any(T <= 0):
        raise ValueError("eps and T must be positive")
    return eps, T

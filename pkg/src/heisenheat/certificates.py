"""Test-function functionals evaluated on numerical trajectories.

Two families of cutoffs are built from one smooth step profile:

* ``phi_R(t, eta) = beta(t/R^2) alpha(x/R) alpha(y/R) beta(tau/R^2)``,
  supported in ``[0, R^2] x B(R) x B(R) x [-R^2, R^2]``;
* ``psi_R = phi(s_R)^(2p')`` with ``s_R = (t^2 + |x|^4 + |y|^4 + tau^2) / R^2``,
  supported where ``s_R < 1``, and its companion ``psi*_R`` built from the
  cutoff ``phi*`` that vanishes on ``[0, 1/2)``.

The functionals ``I_R, J_R`` (for ``phi_R``) and ``X(R), Y(R), W(R)`` (for
``psi_R``) are computed by space-time quadrature over stored snapshots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .grid import GridSpec, ScalarField, integrate
from .sublaplacian import apply_sublaplacian

__all__ = [
    "BumpPair",
    "CertificateReport",
    "make_bumps",
    "phi_R_eval",
    "psi_R_eval",
    "derivative_bound_check",
    "functionals_phi",
    "functionals_psi",
    "lemma_g_check",
    "subcritical_exponent",
    "subcritical_inequality_check",
    "si2_margins",
    "certify_trajectory",
]


def _psi(z, k):
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-k / z[pos])
    return out


def smooth_step(z, k: float = 1.0):
    """1 for ``z <= 0``, 0 for ``z >= 1``, smooth and decreasing in between."""
    z = np.asarray(z, dtype=np.float64)
    a = _psi(1.0 - z, k)
    b = _psi(z, k)
    with np.errstate(invalid="ignore"):
        return np.where(z <= 0, 1.0, np.where(z >= 1, 0.0, a / (a + b)))


@dataclass(frozen=True)
class BumpPair:
    """The cutoffs ``alpha`` (radial), ``beta`` (even), ``phi`` and ``phi_star``."""

    p: float
    k: float = 1.0

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1)

    def alpha(self, r):
        """Radial profile: 1 on ``|r| <= 1/2``, 0 for ``|r| >= 1``."""
        return smooth_step((np.abs(r) - 0.5) / 0.5, self.k)

    def beta(self, r):
        """Even profile: 1 on ``[-1/4, 1/4]``, 0 outside ``(-1, 1)``."""
        return smooth_step((np.abs(r) - 0.25) / 0.75, self.k)

    def phi(self, s):
        """1 on ``[0, 1/2]``, 0 on ``[1, inf)``."""
        return smooth_step((np.asarray(s, dtype=np.float64) - 0.5) / 0.5, self.k)

    def phi_star(self, s):
        s = np.asarray(s, dtype=np.float64)
        return np.where(s < 0.5, 0.0, self.phi(s))


def make_bumps(p: float, smoothness_scale: float = 1.0) -> BumpPair:
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not smoothness_scale > 0:
        raise ValueError("smoothness_scale must be positive")
    return BumpPair(float(p), float(smoothness_scale))


def _radius(v):
    v = np.asarray(v, dtype=np.float64)
    return np.sqrt(np.sum(v * v, axis=0)) if v.ndim and v.shape[0] > 0 else np.abs(v)


def phi_R_eval(bumps: BumpPair, R: float, t, x, y, tau):
    """``phi_R``; ``x`` and ``y`` carry the n components on the leading axis."""
    if not R > 0:
        raise ValueError("R must be positive")
    t = np.asarray(t, dtype=np.float64)
    val = bumps.beta(t / R**2) * bumps.alpha(_radius(x) / R) * bumps.alpha(_radius(y) / R) \
        * bumps.beta(np.asarray(tau) / R**2)
    return np.where(t < 0, 0.0, val)


def s_R(R: float, t, x, y, tau):
    rx = _radius(x)
    ry = _radius(y)
    return (np.asarray(t) ** 2 + rx**4 + ry**4 + np.asarray(tau) ** 2) / R**2


def psi_R_eval(bumps: BumpPair, R: float, t, x, y, tau):
    """``(psi_R, psi*_R)``."""
    if not R > 0:
        raise ValueError("R must be positive")
    s = s_R(R, t, x, y, tau)
    e = 2 * bumps.p_conj
    neg = np.asarray(t) < 0
    return (np.where(neg, 0.0, bumps.phi(s) ** e), np.where(neg, 0.0, bumps.phi_star(s) ** e))


# --------------------------------------------------- derivative quotients

def _support_grid(R: float, family: str, N: int, n: int = 1) -> GridSpec:
    # box slightly larger than the support, scaled with R like the dilations
    L = 1.05 * (R if family == "phi" else math.sqrt(R))
    return GridSpec(n, L, L * L, N, N)


def _quotient(deriv: np.ndarray, target: np.ndarray, scale: float, p: float) -> float:
    keep = target > 1e-12
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(deriv[keep]) / (scale * target[keep] ** (1.0 / p))))


def derivative_bound_check(R_values, p: float, N: int = 65, n_times: int = 33,
                           bumps: BumpPair | None = None, band: float = 2.0) -> dict:
    """Fitted constants ``C(R)`` for the four derivative bounds.

    ``|d_t phi_R|, |Delta_H phi_R| <= C R^-2 phi_R^(1/p)`` and
    ``|d_t psi_R|, |Delta_H psi_R| <= C R^-1 (psi*_R)^(1/p)``.  ``Delta_H`` is
    the production stencil on a grid covering the support; ``d_t`` is a
    central difference.  A family passes when ``max C / min C < band``.
    """
    bumps = bumps or make_bumps(p)
    R_values = [float(R) for R in R_values]
    out = {k: [] for k in ("phi_t", "phi_lap", "psi_t", "psi_lap")}
    for R in R_values:
        for fam in ("phi", "psi"):
            g = _support_grid(R, fam, N)
            x, y, tau = g.coordinates()
            x = np.array(x)
            y = np.array(y)
            t_end = R**2 if fam == "phi" else R
            ht = t_end * 1e-4
            ct = cl = 0.0
            for t in np.linspace(ht, t_end - ht, n_times):
                if fam == "phi":
                    f = phi_R_eval(bumps, R, t, x, y, tau)
                    fp = phi_R_eval(bumps, R, t + ht, x, y, tau)
                    fm = phi_R_eval(bumps, R, t - ht, x, y, tau)
                    target, scale = f, R**-2
                else:
                    f, target = psi_R_eval(bumps, R, t, x, y, tau)
                    fp = psi_R_eval(bumps, R, t + ht, x, y, tau)[0]
                    fm = psi_R_eval(bumps, R, t - ht, x, y, tau)[0]
                    scale = 1.0 / R
                f = np.broadcast_to(f, g.shape)
                target = np.broadcast_to(target, g.shape)
                dt_f = np.broadcast_to((fp - fm) / (2 * ht), g.shape)
                lap = apply_sublaplacian(ScalarField(g, np.array(f))).values
                ct = max(ct, _quotient(dt_f, target, scale, p))
                cl = max(cl, _quotient(lap, target, scale, p))
            out[f"{fam}_t"].append(ct)
            out[f"{fam}_lap"].append(cl)
    passed = {k: bool(min(v) > 0 and max(v) / min(v) < band) for k, v in out.items()}
    return {"R": R_values, "C_fit": out, "passed": passed}


# ------------------------------------------------------------ functionals

def _snapshot_series(traj, t_end: float):
    """Sorted ``(t, field)`` pairs with ``t <= t_end`` (including t = 0)."""
    snaps = dict(traj.snapshots)
    if 0.0 not in snaps and traj.u0 is not None:
        snaps[0.0] = traj.u0 * traj.config.epsilon
    items = sorted((t, f) for t, f in snaps.items() if t <= t_end * (1 + 1e-12))
    return items


def _horizon(traj) -> float:
    if traj.snapshots:
        return max(traj.snapshots)
    return 0.0


def _trapezoid(ts, vals) -> float:
    ts = np.asarray(ts)
    vals = np.asarray(vals)
    if ts.size < 2:
        return 0.0
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts)))


def functionals_phi(traj, R: float, p: float, bumps: BumpPair | None = None):
    """``(I_R, J_R)`` with ``I_R = int int |u|^p phi_R`` and ``J_R = int u0 phi_R(0, .)``."""
    bumps = bumps or make_bumps(p)
    T = _horizon(traj)
    if R**2 > T * (1 + 1e-12):
        raise ValueError(f"snapshots reach t={T:.6g}; the largest admissible R is sqrt(T)={math.sqrt(T):.6g}")
    g = traj.u0.grid
    x, y, tau = g.coordinates()
    x = np.array(x)
    y = np.array(y)
    ts, vals = [], []
    for t, f in _snapshot_series(traj, R**2):
        w = phi_R_eval(bumps, R, t, x, y, tau)
        vals.append(integrate(f.with_values(np.abs(f.values) ** p * w)))
        ts.append(t)
    I_R = _trapezoid(ts, vals)
    J_R = integrate(traj.u0.with_values(traj.u0.values * phi_R_eval(bumps, R, 0.0, x, y, tau)))
    return I_R, J_R


def _psi_tables(series, g: GridSpec, R_max: float, p: float):
    """Per snapshot: ``(t, S, w |u|^p)`` on the nodes inside the largest support.

    ``S = t^2 + |x|^4 + |y|^4 + tau^2`` so that ``s_r = S / r^2``; keeping
    only nodes with ``S < R_max^2`` makes repeated evaluation over r cheap.
    """
    x, y, tau = g.coordinates()
    S0 = np.broadcast_to(_radius(np.array(x)) ** 4 + _radius(np.array(y)) ** 4 + tau**2, g.shape)
    w = g.quadrature_weights()
    out = []
    for t, f in series:
        if t > R_max:
            break
        S = S0 + t * t
        keep = S < R_max**2
        out.append((t, S[keep], (w * np.abs(f.values) ** p)[keep]))
    return out


def _XY(tables, r: float, bumps: BumpPair):
    e = 2 * bumps.p_conj
    ts, xv, yv = [], [], []
    for t, S, wu in tables:
        if t > r:
            break
        s = S / r**2
        ph = bumps.phi(s)
        a = ph**e
        b = np.where(s < 0.5, 0.0, a)
        xv.append(float(np.dot(wu, a)))
        yv.append(float(np.dot(wu, b)))
        ts.append(t)
    return _trapezoid(ts, xv), _trapezoid(ts, yv)


def functionals_psi(traj, R_list, p: float, bumps: BumpPair | None = None,
                    r_points: int = 64, min_snapshots: int = 8):
    """``X(R), Y(R), W(R)`` for each R; ``W(R) = int_0^R Y(r) dr / r``.

    ``W`` uses a log-spaced r grid starting at the smallest r whose
    t-support holds ``min_snapshots`` snapshots; the omitted piece near
    ``r = 0`` only lowers ``W``.
    """
    bumps = bumps or make_bumps(p)
    T = _horizon(traj)
    R_list = [float(R) for R in R_list]
    if max(R_list) > T * (1 + 1e-12):
        raise ValueError(f"snapshots reach t={T:.6g}; R must not exceed it")
    series = _snapshot_series(traj, max(R_list))
    snap_t = np.array([t for t, _ in series])
    if snap_t.size < min_snapshots or snap_t[min_snapshots - 1] > min(R_list):
        raise ValueError(f"snapshot density too low: need {min_snapshots} snapshots in [0, {min(R_list)}]")
    r_min = max(float(snap_t[min_snapshots - 1]), 1e-300)
    tables = _psi_tables(series, traj.u0.grid, max(R_list), p)
    X, Y, W = [], [], []
    for R in R_list:
        xr, yr = _XY(tables, R, bumps)
        X.append(xr)
        Y.append(yr)
        rs = np.geomspace(r_min, R, r_points)
        ys = [_XY(tables, r, bumps)[1] for r in rs]
        W.append(_trapezoid(np.log(rs), ys))
    return np.array(X), np.array(Y), np.array(W)


def si2_margins(X, W) -> np.ndarray:
    """Relative margin ``(X - (2/log 2) W) / X`` of the integrated lemma."""
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(X > 0, (X - 2.0 / math.log(2.0) * W) / X, 0.0)


# ----------------------------------------------------------------- lemma g

def lemma_g_check(g_fn, A_values, R_values, g_unstarred=None, samples: int = 1000):
    """Compare ``int_0^R g(A/r^2) dr/r`` with ``(log 2 / 2) g(A/R^2)``.

    ``g`` must vanish on ``[0, 1/2] U [1, inf)`` and decrease on ``(1/2, 1)``.
    With ``g_unstarred`` (equal to 1 on ``[0, 1/2]``) the right-hand side
    is also evaluated with it.  Returns a list of dicts per ``(A, R)``.
    """
    s = np.linspace(0.0, 2.0, 2 * samples + 1)
    gs = np.asarray(g_fn(s), dtype=np.float64)
    off = (s < 0.5) | (s >= 1.0)
    if np.any(np.abs(gs[off]) > 1e-14):
        raise ValueError("g must vanish on [0, 1/2) and [1, inf)")
    mid = (s > 0.5) & (s < 1.0)
    if np.any(np.diff(gs[mid]) > 1e-14):
        raise ValueError("g must be decreasing on (1/2, 1)")
    c = math.log(2.0) / 2.0
    rows = []
    for A in A_values:
        for R in R_values:
            lo = A / R**2
            # substitute sigma = A / r^2: int_0^R g(A/r^2) dr/r = (1/2) int_{A/R^2}^inf g(sigma) dsigma/sigma
            a = max(lo, 0.5)
            lhs = 0.0
            if a < 1.0:
                lhs = 0.5 * quad(lambda z: float(g_fn(np.array([z]))[0]) / z, a, 1.0,
                                 limit=200, epsabs=1e-13, epsrel=1e-11)[0]
            rhs = c * float(g_fn(np.array([lo]))[0])
            row = {"A": A, "R": R, "lhs": lhs, "rhs_literal": rhs,
                   "literal_margin": rhs - lhs, "literal_holds": lhs <= rhs + 1e-12}
            if g_unstarred is not None:
                rhs2 = c * float(g_unstarred(np.array([lo]))[0])
                row.update(rhs_applied=rhs2, applied_margin=rhs2 - lhs,
                           applied_holds=lhs <= rhs2 + 1e-12)
            rows.append(row)
    return rows


# -------------------------------------------------- subcritical inequality

def subcritical_exponent(p: float, Q: int) -> float:
    """``Q - (Q + 2)/p``: negative below the Fujita exponent, zero at it."""
    return Q - (Q + 2) / p


def subcritical_inequality_check(traj, epsilon: float, p: float, R_values, band: float = 4.0,
                                 bumps: BumpPair | None = None) -> dict:
    """Fit ``C(R) = (I_R + eps J_R) / (R^(Q-(Q+2)/p) I_R^(1/p))`` over admissible R."""
    Q = traj.u0.grid.Q
    e = subcritical_exponent(p, Q)
    Cs, Is, Js = [], [], []
    for R in R_values:
        I_R, J_R = functionals_phi(traj, R, p, bumps)
        if not J_R > 0:
            raise ValueError(f"J_R = {J_R:.3g} is not positive at R = {R}: positivity hypothesis fails")
        Is.append(I_R)
        Js.append(J_R)
        Cs.append((I_R + epsilon * J_R) / (R**e * I_R ** (1.0 / p)) if I_R > 0 else math.inf)
    Cs = np.array(Cs)
    ok = bool(np.all(np.isfinite(Cs)) and Cs.max() / Cs.min() < band)
    return {"R": list(R_values), "I_R": Is, "J_R": Js, "C_fit": Cs.tolist(), "exponent": e,
            "passed": ok}


@dataclass
class CertificateReport:
    R_values: list
    I_R: list = field(default_factory=list)
    J_R: list = field(default_factory=list)
    X_R: list = field(default_factory=list)
    Y_R: list = field(default_factory=list)
    W_R: list = field(default_factory=list)
    fitted_constants: dict = field(default_factory=dict)
    si2_margin: list = field(default_factory=list)
    subcrit_Cfit: list = field(default_factory=list)
    inequalities: dict = field(default_factory=dict)

    def rows(self):
        fc = self.fitted_constants
        nan = [math.nan] * len(self.R_values)
        for i, R in enumerate(self.R_values):
            def at(seq):
                return seq[i] if i < len(seq) else math.nan
            yield {"R": R, "I_R": at(self.I_R), "J_R": at(self.J_R), "X_R": at(self.X_R),
                   "Y_R": at(self.Y_R), "W_R": at(self.W_R),
                   "C_fit_phi_t": at(fc.get("phi_t", nan)), "C_fit_phi_lap": at(fc.get("phi_lap", nan)),
                   "C_fit_psi_t": at(fc.get("psi_t", nan)), "C_fit_psi_lap": at(fc.get("psi_lap", nan)),
                   "si2_margin": at(self.si2_margin), "subcrit_Cfit": at(self.subcrit_Cfit)}


def certify_trajectory(traj, epsilon: float, p: float, R_values, deriv_N: int = 65,
                       si2_slack: float = 0.02, bumps: BumpPair | None = None) -> CertificateReport:
    """All certificate functionals and checks for one trajectory with snapshots.

    Radii beyond a functional's admissible range (``R^2`` or ``R`` past the
    last snapshot) are left as NaN for that functional.
    """
    bumps = bumps or make_bumps(p)
    R_values = sorted(float(R) for R in R_values)
    T = _horizon(traj)
    nan = math.nan
    rep = CertificateReport(R_values)
    for R in R_values:
        if R**2 <= T:
            I_R, J_R = functionals_phi(traj, R, p, bumps)
        else:
            I_R = J_R = nan
        rep.I_R.append(I_R)
        rep.J_R.append(J_R)
    psi_R = [R for R in R_values if R <= T]
    X = Y = W = np.array([])
    if psi_R:
        X, Y, W = functionals_psi(traj, psi_R, p, bumps)
    pad = [nan] * (len(R_values) - len(psi_R))
    rep.X_R = list(X) + pad
    rep.Y_R = list(Y) + pad
    rep.W_R = list(W) + pad
    margins = si2_margins(X, W) if psi_R else np.array([])
    rep.si2_margin = list(margins) + pad
    deriv = derivative_bound_check(R_values, p, N=deriv_N, bumps=bumps)
    rep.fitted_constants = deriv["C_fit"]
    ineq = {f"derivative_{k}": v for k, v in deriv["passed"].items()}
    ineq["si2"] = bool(len(margins) > 0 and np.all(margins >= -si2_slack))
    phi_R = [R for R in R_values if R**2 <= T]
    if len(phi_R) >= 2:
        sub = subcritical_inequality_check(traj, epsilon, p, phi_R, bumps=bumps)
        rep.subcrit_Cfit = sub["C_fit"] + [nan] * (len(R_values) - len(phi_R))
        ineq["subcritical_bounded"] = sub["passed"]
    else:
        rep.subcrit_Cfit = [nan] * len(R_values)
    e = 2 * bumps.p_conj
    lg = lemma_g_check(lambda s: bumps.phi_star(s) ** e, (0.3, 0.7, 1.2), (1.0,),
                       g_unstarred=lambda s: bumps.phi(s) ** e)
    ineq["lemma_g_applied"] = all(r["applied_holds"] for r in lg)
    rep.fitted_constants = dict(rep.fitted_constants, lemma_g=lg)
    rep.inequalities = ineq
    return rep

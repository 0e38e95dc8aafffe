"""Reference values computed without the package's own numerics."""
from __future__ import annotations

import numpy as np


def exact_heat_kernel(t, r2, tau, nodes: int = 4000):
    """Heat kernel of the sub-Laplacian on H_1 from its Fourier integral in tau.

    h_t(r^2, tau) = pi^-2 int_0^inf cos(lam tau) lam / sinh(4 lam t)
                    exp(-lam coth(4 lam t) r^2) dlam,

    evaluated by Gauss-Legendre on [0, 10/t]; the integrand there is below
    e^-40 of its peak.
    """
    lam_max = 10.0 / t
    z, w = np.polynomial.legendre.leggauss(nodes)
    lam = (0.5 * lam_max * (z + 1))[:, None]
    w = (0.5 * lam_max * w)[:, None]
    r2 = np.asarray(r2, dtype=float)
    shape = np.broadcast_shapes(r2.shape, np.shape(tau))
    r2 = np.broadcast_to(r2, shape).ravel()[None]
    tau = np.broadcast_to(np.asarray(tau, dtype=float), shape).ravel()[None]
    a = 4 * lam * t
    f = lam / np.sinh(a) * np.exp(-lam / np.tanh(a) * r2) * np.cos(lam * tau)
    return ((w * f).sum(0) / np.pi**2).reshape(shape)


def ode_lifespan(amplitude: float, p: float) -> float:
    """Blow-up time of u' = u^p, u(0) = amplitude."""
    return amplitude ** (1.0 - p) / (p - 1.0)


def brute_force_convolution(v, h, xs, taus, weights):
    """(v * h)(eta) = sum_zeta v(eta o zeta^-1) h(zeta) w(zeta) on an n = 1 lattice.

    ``v`` and ``h`` are (N, N, M) arrays on the axes ``xs`` (for x and y)
    and ``taus``; v is linear in tau between nodes and reaches zero at one
    ghost node past each end of the tau axis.
    """
    N, M = len(xs), len(taus)
    ht = taus[1] - taus[0]
    tg = np.concatenate([[taus[0] - ht], taus, [taus[-1] + ht]])
    out = np.zeros_like(v)
    for i in range(N):
        for j in range(N):
            for k in range(M):
                acc = 0.0
                for a in range(N):
                    for b in range(N):
                        for c in range(M):
                            hz = h[a, b, c] * weights[a, b, c]
                            if hz == 0.0:
                                continue
                            ii, jj = i - a + N // 2, j - b + N // 2
                            if not (0 <= ii < N and 0 <= jj < N):
                                continue
                            t = taus[k] - taus[c] - 2.0 * (xs[i] * xs[b] - xs[a] * xs[j])
                            acc += hz * np.interp(t, tg, np.pad(v[ii, jj], 1), left=0.0, right=0.0)
                out[i, j, k] = acc
    return out

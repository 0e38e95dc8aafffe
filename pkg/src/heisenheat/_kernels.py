"""Compiled loops for the n = 1 fast paths.

All kernels work on arrays indexed ``[x, y, tau]``.  The stencil kernels
read a *padded* array carrying one ghost layer on every face; the caller is
responsible for filling the ghost layer (zeros for Dirichlet, wrapped copies
for periodic).  Every output node is computed independently and written
once, so results do not depend on how ``prange`` splits the work.
"""
import math
import os

import numpy as np

# an old system TBB only produces a warning before numba falls back to OpenMP
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from numba import njit, prange  # noqa: E402

# power-law selector for |u|^p
POW_GENERIC, POW_2, POW_1_5, POW_1_25 = 0, 1, 2, 3


def pow_mode(p: float) -> int:
    if p == 2.0:
        return POW_2
    if p == 1.5:
        return POW_1_5
    if p == 1.25:
        return POW_1_25
    return POW_GENERIC


@njit(inline="always")
def _abspow(c, p, mode):
    a = abs(c)
    if a == 0.0:
        return 0.0
    if mode == 1:
        return a * a
    if mode == 2:
        return a * math.sqrt(a)
    if mode == 3:
        return a * math.sqrt(math.sqrt(a))
    return a ** p


@njit(inline="always")
def _lap_at(P, I, J, K, cxx, ctt, cxt, cyt):
    c = P[I, J, K]
    return ((P[I + 1, J, K] + P[I - 1, J, K] + P[I, J + 1, K] + P[I, J - 1, K] - 4.0 * c) * cxx
            + (P[I, J, K + 1] - 2.0 * c + P[I, J, K - 1]) * ctt
            + cxt * (P[I + 1, J, K + 1] - P[I + 1, J, K - 1] - P[I - 1, J, K + 1] + P[I - 1, J, K - 1])
            + cyt * (P[I, J + 1, K + 1] - P[I, J + 1, K - 1] - P[I, J - 1, K + 1] + P[I, J - 1, K - 1]))


@njit(parallel=True, cache=True)
def sublaplacian_h1(P, out, xs, ys, hx, ht):
    """Expanded-coefficient sub-Laplacian at every node of the unpadded grid."""
    Nx = out.shape[0]
    Ny = out.shape[1]
    Nt = out.shape[2]
    cxx = 1.0 / (hx * hx)
    for i in prange(Nx):
        x = xs[i]
        for j in range(Ny):
            y = ys[j]
            ctt = 4.0 * (x * x + y * y) / (ht * ht)
            cxt = y / (hx * ht)
            cyt = -x / (hx * ht)
            for k in range(Nt):
                out[i, j, k] = _lap_at(P, i + 1, j + 1, k + 1, cxx, ctt, cxt, cyt)


@njit(parallel=True, cache=True)
def euler_step_h1(P, Pnew, xs, ys, hx, ht, dt, p, mode, nonlinear):
    """``Pnew = P + dt (Lap P + |P|^p)`` on the interior of the padded arrays."""
    Nx = P.shape[0] - 2
    Ny = P.shape[1] - 2
    Nt = P.shape[2] - 2
    cxx = 1.0 / (hx * hx)
    for i in prange(Nx):
        x = xs[i]
        for j in range(Ny):
            y = ys[j]
            ctt = 4.0 * (x * x + y * y) / (ht * ht)
            cxt = y / (hx * ht)
            cyt = -x / (hx * ht)
            # the mode branch sits outside the k loops so they vectorize
            for k in range(Nt):
                Pnew[i + 1, j + 1, k + 1] = P[i + 1, j + 1, k + 1] + dt * _lap_at(
                    P, i + 1, j + 1, k + 1, cxx, ctt, cxt, cyt)
            if not nonlinear:
                continue
            if mode == 1:
                for k in range(Nt):
                    a = abs(P[i + 1, j + 1, k + 1])
                    Pnew[i + 1, j + 1, k + 1] += dt * (a * a)
            elif mode == 2:
                for k in range(Nt):
                    a = abs(P[i + 1, j + 1, k + 1])
                    Pnew[i + 1, j + 1, k + 1] += dt * (a * math.sqrt(a))
            elif mode == 3:
                for k in range(Nt):
                    a = abs(P[i + 1, j + 1, k + 1])
                    Pnew[i + 1, j + 1, k + 1] += dt * (a * math.sqrt(math.sqrt(a)))
            else:
                for k in range(Nt):
                    Pnew[i + 1, j + 1, k + 1] += dt * _abspow(P[i + 1, j + 1, k + 1], p, 0)


@njit(cache=True)
def wrap_ghosts_h1(P):
    """Fill the ghost layer periodically (node lattice of period N)."""
    Nx = P.shape[0] - 2
    Ny = P.shape[1] - 2
    Nt = P.shape[2] - 2
    for j in range(P.shape[1]):
        for k in range(P.shape[2]):
            P[0, j, k] = P[Nx, j, k]
            P[Nx + 1, j, k] = P[1, j, k]
    for i in range(P.shape[0]):
        for k in range(P.shape[2]):
            P[i, 0, k] = P[i, Ny, k]
            P[i, Ny + 1, k] = P[i, 1, k]
    for i in range(P.shape[0]):
        for j in range(P.shape[1]):
            P[i, j, 0] = P[i, j, Nt]
            P[i, j, Nt + 1] = P[i, j, 1]


@njit(cache=True)
def field_stats_h1(P):
    """(max |u|, min u, max |u| on the outer node shell, trapezoid-weighted sum)
    of the padded interior.  NaN anywhere makes the weighted sum NaN."""
    Nx = P.shape[0] - 2
    Ny = P.shape[1] - 2
    Nt = P.shape[2] - 2
    sup = 0.0
    lo = np.inf
    bmax = 0.0
    total = 0.0
    for i in range(1, Nx + 1):
        wi = 0.5 if (i == 1 or i == Nx) else 1.0
        for j in range(1, Ny + 1):
            wij = wi * (0.5 if (j == 1 or j == Ny) else 1.0)
            row = 0.0
            rsup = 0.0
            rlo = np.inf
            for k in range(1, Nt + 1):
                c = P[i, j, k]
                row += c
                rsup = max(rsup, abs(c))
                rlo = min(rlo, c)
            row -= 0.5 * (P[i, j, 1] + P[i, j, Nt])
            total += wij * row
            sup = max(sup, rsup)
            lo = min(lo, rlo)
            if i == 1 or i == Nx or j == 1 or j == Ny:
                bmax = max(bmax, rsup)
            else:
                bmax = max(bmax, abs(P[i, j, 1]), abs(P[i, j, Nt]))
    return sup, lo, bmax, total


@njit(parallel=True, cache=True)
def group_convolve_h1(v, kidx, kval, mask, Lxy, Lt, hx, ht):
    N = v.shape[0]
    Nt = v.shape[2]
    c = N // 2
    ct = Nt // 2
    K = kidx.shape[0]
    out = np.zeros(v.shape)
    for i in prange(N):
        x = (i - c) * hx
        for j in range(N):
            y = (j - c) * hx
            for k in range(Nt):
                if not mask[i, j, k]:
                    continue
                tau = (k - ct) * ht
                acc = 0.0
                for m in range(K):
                    a = kidx[m, 0]
                    b = kidx[m, 1]
                    si = i - (a - c)
                    sj = j - (b - c)
                    if si < 0 or si >= N or sj < 0 or sj >= N:
                        continue
                    xp = (a - c) * hx
                    yp = (b - c) * hx
                    tp = (kidx[m, 2] - ct) * ht
                    ts = tau - tp + 2.0 * (xp * y - x * yp)
                    f = ts / ht + ct
                    k0 = int(math.floor(f))
                    fr = f - k0
                    val = 0.0
                    if 0 <= k0 < Nt:
                        val += (1.0 - fr) * v[si, sj, k0]
                    if 0 <= k0 + 1 < Nt:
                        val += fr * v[si, sj, k0 + 1]
                    acc += kval[m] * val
                out[i, j, k] = acc
    return out

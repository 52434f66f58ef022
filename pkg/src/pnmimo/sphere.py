"""Exact nearest-neighbor search over a finite PAM grid.

Schnorr-Euchner depth-first enumeration with radius shrinking. The first
leaf reached is the Babai (successive quantization) point, which sets the
initial radius. Ties are broken deterministically: candidates at each
level are tried in order of distance to the unconstrained center (stable
sort, lower level first on equal distance) and an incumbent is only
replaced by a strictly closer leaf.
"""

import numpy as np
from numba import njit

from .errors import RankDeficient


@njit(cache=True)
def _se_enumerate(r_mat, y_t, levels):
    n = r_mat.shape[0]
    nlev = levels.shape[0]
    order = np.empty((n, nlev), dtype=np.int64)
    ptr = np.zeros(n, dtype=np.int64)
    xval = np.zeros(n, dtype=np.float64)
    xidx = np.zeros(n, dtype=np.int64)
    acc = np.zeros(n + 1, dtype=np.float64)   # acc[i+1]: distance from levels i+1..n-1
    cent = np.zeros(n, dtype=np.float64)      # residual target at each level
    best_idx = np.zeros(n, dtype=np.int64)
    best = np.inf
    nodes = 0

    def _enter(i):
        e = y_t[i]
        for j in range(i + 1, n):
            e -= r_mat[i, j] * xval[j]
        cent[i] = e
        c = e / r_mat[i, i]
        d = np.abs(levels - c)
        order[i, :] = np.argsort(d, kind="mergesort")
        ptr[i] = 0

    i = n - 1
    _enter(i)
    while True:
        if ptr[i] < nlev:
            k = order[i, ptr[i]]
            ptr[i] += 1
            diff = cent[i] - r_mat[i, i] * levels[k]
            d = acc[i + 1] + diff * diff
            nodes += 1
            if d < best:
                if i == 0:
                    xidx[0] = k
                    best = d
                    best_idx[:] = xidx
                else:
                    xidx[i] = k
                    xval[i] = levels[k]
                    acc[i] = d
                    i -= 1
                    _enter(i)
            else:
                # ordered by distance: every later sibling is at least as far
                ptr[i] = nlev
        else:
            i += 1
            if i == n:
                break
    return best_idx, best, nodes


def real_nnd(y_r: np.ndarray, h_r: np.ndarray, levels: np.ndarray):
    """argmin ||y_r - h_r x||^2 with every entry of x drawn from levels.

    Returns (x, node_count). h_r must have full column rank.
    """
    y_r = np.asarray(y_r, dtype=np.float64)
    h_r = np.asarray(h_r, dtype=np.float64)
    levels = np.ascontiguousarray(levels, dtype=np.float64)
    q, r = np.linalg.qr(h_r)
    diag = np.diag(r)
    if np.min(np.abs(diag)) < 1e-12 * max(1.0, np.max(np.abs(diag))):
        raise RankDeficient("channel matrix is rank deficient")
    sign = np.sign(diag)
    r = r * sign[:, None]
    y_t = (q.T @ y_r) * sign
    idx, _, nodes = _se_enumerate(np.ascontiguousarray(r), np.ascontiguousarray(y_t), levels)
    return levels[idx], int(nodes)

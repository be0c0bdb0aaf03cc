"""Pure-numpy masked k-nearest-neighbour search (fallback for the compiled kernel).

Produces exactly the same output as ``_kernels.masked_knn``: squared
distances are accumulated coordinate by coordinate in the same order, and ties
are broken by ascending row index.
"""
from __future__ import annotations

import numpy as np

_BLOCK_CELLS = 1 << 21


def masked_knn(X, cand, cols, Q, k):
    X = np.asarray(X, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    cand = np.asarray(cand, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    nq, m = Q.shape[0], cand.shape[0]
    kk = min(k, m)
    out = np.empty((nq, max(kk, 0)), dtype=np.intp)
    if kk <= 0 or nq == 0:
        return out
    Xc = X[cand]
    block = max(1, _BLOCK_CELLS // max(m, 1))
    for start in range(0, nq, block):
        stop = min(nq, start + block)
        out[start:stop] = _block(Xc, cand, cols, Q[start:stop], kk)
    return out


def _block(Xc, cand, cols, Qb, kk):
    nb, m = Qb.shape[0], Xc.shape[0]
    dist = np.zeros((nb, m))
    for col in cols:
        diff = Xc[None, :, col] - Qb[:, col, None]
        dist = dist + diff * diff
    if kk < m:
        kth = np.partition(dist, kk - 1, axis=1)[:, kk - 1:kk]
        below = dist < kth
        tied = dist == kth
        need = kk - below.sum(axis=1, keepdims=True)
        keep = below | (tied & (np.cumsum(tied, axis=1) <= need))
        sel = np.nonzero(keep)[1].reshape(nb, kk)
    else:
        sel = np.broadcast_to(np.arange(m), (nb, m))
    # Columns are ascending within a row, so a stable sort on distance
    # leaves equal distances in ascending row order.
    seld = np.take_along_axis(dist, sel, axis=1)
    order = np.argsort(seld, axis=1, kind="stable")
    return cand[np.take_along_axis(sel, order, axis=1)]

"""Pattern-restricted nearest-neighbour search.

Distances are Euclidean over the coordinates selected by a pattern; ties are
broken by ascending row id.  The compiled kernel is used when it was built,
otherwise the numpy implementation; set ``HAMCLF_PURE_PYTHON=1`` to force the
fallback.  Both return identical neighbour sequences.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py
from .lattice import Pattern

try:
    if os.environ.get("HAMCLF_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _kernels_py.masked_knn}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.masked_knn
DEFAULT_BACKEND = "compiled" if _compiled is not None else "python"


class NoAvailableCases(ValueError):
    """The candidate set for a neighbour query is empty."""


def get_backend(name: str | None = None):
    name = name or DEFAULT_BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}") from None


class IndexedPoints:
    """Training points ordered by row id, ready for masked neighbour queries.

    Parameters
    ----------
    points : array_like, shape (n, d)
    row_ids : array_like of int, optional
        Defaults to ``0..n-1``.  Must be unique.
    d : int, optional
        Needed only when ``points`` is empty.
    backend : {"compiled", "python"}, optional
    """

    def __init__(self, points, row_ids=None, d=None, backend=None):
        pts = np.asarray(points, dtype=np.float64)
        if pts.size == 0:
            if d is None:
                d = pts.shape[1] if pts.ndim == 2 else 0
            pts = np.empty((0, d))
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array")
        ids = np.arange(len(pts)) if row_ids is None else np.asarray(row_ids, dtype=np.int64)
        if ids.shape != (len(pts),):
            raise ValueError("need exactly one row id per point")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("row ids must be unique")
        order = np.argsort(ids, kind="stable")
        self.row_ids = ids[order]
        self.points = np.ascontiguousarray(pts[order])
        self.d = pts.shape[1]
        self.backend = backend or DEFAULT_BACKEND
        self._knn = get_backend(self.backend)

    def __len__(self) -> int:
        return len(self.row_ids)

    def positions(self, candidate_rows) -> np.ndarray:
        """Sorted internal positions of the given row ids."""
        if candidate_rows is None:
            return np.arange(len(self.row_ids), dtype=np.intp)
        rows = np.unique(np.asarray(list(candidate_rows) if not isinstance(candidate_rows, np.ndarray)
                                    else candidate_rows, dtype=np.int64))
        pos = np.searchsorted(self.row_ids, rows)
        if np.any(pos >= len(self.row_ids)) or np.any(self.row_ids[np.minimum(pos, len(self.row_ids) - 1)] != rows):
            raise KeyError("candidate rows not present in the index")
        return pos.astype(np.intp)

    def k_nearest_positions(self, omega: Pattern, queries, k: int, positions) -> np.ndarray:
        """Batched search returning internal positions, shape (n_queries, min(k, m))."""
        if omega.d != self.d:
            raise ValueError(f"pattern dimension {omega.d} != index dimension {self.d}")
        if k < 1:
            raise ValueError("k must be at least 1")
        if len(positions) == 0:
            raise NoAvailableCases(f"no available cases for pattern {omega}")
        Q = np.ascontiguousarray(np.atleast_2d(np.asarray(queries, dtype=np.float64)))
        if Q.shape[1] != self.d:
            raise ValueError(f"query length {Q.shape[1]} != {self.d}")
        cols = np.asarray(omega.coords, dtype=np.intp)
        return self._knn(self.points, np.ascontiguousarray(positions, dtype=np.intp), cols, Q, int(k))

    def k_nearest(self, omega: Pattern, query, k: int, candidate_rows=None) -> list[int]:
        """Row ids of the ``k`` nearest candidates to ``query`` in the coordinates of ``omega``."""
        if candidate_rows is not None and len(candidate_rows) == 0:
            raise NoAvailableCases(f"no available cases for pattern {omega}")
        pos = self.positions(candidate_rows)
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.d,):
            raise ValueError(f"query must have length {self.d}")
        idx = self.k_nearest_positions(omega, q[None, :], k, pos)[0]
        return [int(r) for r in self.row_ids[idx]]


def build(points, row_ids=None, d=None, backend=None) -> IndexedPoints:
    return IndexedPoints(points, row_ids=row_ids, d=d, backend=backend)


def brute_force_k_nearest(points, omega: Pattern, query, k: int, candidate_rows=None) -> list[int]:
    """Reference scan in plain Python: full sort on (distance, row id)."""
    rows = range(len(points)) if candidate_rows is None else sorted(candidate_rows)
    keyed = []
    for r in rows:
        acc = 0.0
        for j in omega.coords:
            diff = float(points[r][j]) - float(query[j])
            acc = acc + diff * diff
        keyed.append((acc, r))
    keyed.sort()
    return [r for _, r in keyed[:k]]

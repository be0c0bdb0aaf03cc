# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled masked k-nearest-neighbour search.

Candidates are scanned in ascending row order and kept in a bounded max-heap
keyed on (squared distance, row).  A later row with a distance equal to the
current worst never displaces it, which yields the ascending-row tie rule.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline bint _after(double da, Py_ssize_t ia, double db, Py_ssize_t ib) noexcept nogil:
    return da > db or (da == db and ia > ib)


cdef void _sift_down(double* hd, Py_ssize_t* hi, Py_ssize_t size, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t child, big
    cdef double td
    cdef Py_ssize_t ti
    while True:
        child = 2 * pos + 1
        if child >= size:
            return
        big = child
        if child + 1 < size and _after(hd[child + 1], hi[child + 1], hd[child], hi[child]):
            big = child + 1
        if not _after(hd[big], hi[big], hd[pos], hi[pos]):
            return
        td = hd[pos]; hd[pos] = hd[big]; hd[big] = td
        ti = hi[pos]; hi[pos] = hi[big]; hi[big] = ti
        pos = big


cdef void _sift_up(double* hd, Py_ssize_t* hi, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t parent
    cdef double td
    cdef Py_ssize_t ti
    while pos > 0:
        parent = (pos - 1) // 2
        if not _after(hd[pos], hi[pos], hd[parent], hi[parent]):
            return
        td = hd[pos]; hd[pos] = hd[parent]; hd[parent] = td
        ti = hi[pos]; hi[pos] = hi[parent]; hi[parent] = ti
        pos = parent


def masked_knn(const double[:, ::1] X, const Py_ssize_t[::1] cand,
               const Py_ssize_t[::1] cols, const double[:, ::1] Q, Py_ssize_t k):
    """Row indices of the ``k`` nearest candidates for each query row.

    ``cand`` must be sorted ascending.  Distances use only ``cols``.
    """
    cdef Py_ssize_t nq = Q.shape[0], m = cand.shape[0], p = cols.shape[0]
    cdef Py_ssize_t kk = k if k < m else m
    out = np.empty((nq, kk), dtype=np.intp)
    if kk <= 0 or nq == 0:
        return out
    cdef Py_ssize_t[:, ::1] res = out
    cdef double[::1] hd = np.empty(kk, dtype=np.float64)
    cdef Py_ssize_t[::1] hi = np.empty(kk, dtype=np.intp)
    cdef Py_ssize_t q, c, j, r, size, col
    cdef double acc, diff
    with nogil:
        for q in range(nq):
            size = 0
            for c in range(m):
                r = cand[c]
                acc = 0.0
                for j in range(p):
                    col = cols[j]
                    diff = X[r, col] - Q[q, col]
                    acc = acc + diff * diff
                if size < kk:
                    hd[size] = acc
                    hi[size] = r
                    _sift_up(&hd[0], &hi[0], size)
                    size += 1
                elif acc < hd[0]:
                    hd[0] = acc
                    hi[0] = r
                    _sift_down(&hd[0], &hi[0], size, 0)
            while size > 0:
                res[q, size - 1] = hi[0]
                size -= 1
                hd[0] = hd[size]
                hi[0] = hi[size]
                _sift_down(&hd[0], &hi[0], size, 0)
    return out

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled quilting hot loops: overlap scoring and the seam dynamic program.

Same contract as _quilt_kernels_py; see there for semantics. The scoring
loop dominates quilting wall time (pool_size * overlap_area work per
placement), which is why it gets a compiled twin.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

BACKEND = "compiled"


def overlap_ssd(double[:, :, :, ::1] pool, double[:, :, ::1] left,
                double[:, :, ::1] top, bint use_left, bint use_top,
                Py_ssize_t overlap):
    cdef Py_ssize_t n = pool.shape[0]
    cdef Py_ssize_t P = pool.shape[1]
    cdef Py_ssize_t C = pool.shape[3]
    cdef Py_ssize_t i, r, c, k, x0
    cdef double s, d
    out = np.zeros(n)
    cdef double[::1] scores = out
    x0 = overlap if use_left else 0
    for i in range(n):
        s = 0.0
        if use_left:
            for r in range(P):
                for c in range(overlap):
                    for k in range(C):
                        d = pool[i, r, c, k] - left[r, c, k]
                        s += d * d
        if use_top:
            for r in range(overlap):
                for c in range(x0, P):
                    for k in range(C):
                        d = pool[i, r, c, k] - top[r, c, k]
                        s += d * d
        scores[i] = s
    return out


def seam_path(double[:, ::1] errors):
    cdef Py_ssize_t h = errors.shape[0]
    cdef Py_ssize_t w = errors.shape[1]
    cdef Py_ssize_t i, j, nj, pick
    cdef double m, best
    suffix_arr = np.empty((h, w))
    cdef double[:, ::1] suffix = suffix_arr
    path_arr = np.empty(h, dtype=np.int64)
    cdef long long[::1] path = path_arr
    for j in range(w):
        suffix[h - 1, j] = errors[h - 1, j]
    for i in range(h - 2, -1, -1):
        for j in range(w):
            m = suffix[i + 1, j]
            if j > 0 and suffix[i + 1, j - 1] < m:
                m = suffix[i + 1, j - 1]
            if j < w - 1 and suffix[i + 1, j + 1] < m:
                m = suffix[i + 1, j + 1]
            suffix[i, j] = errors[i, j] + m
    j = 0
    best = suffix[0, 0]
    for nj in range(1, w):
        if suffix[0, nj] < best:
            best = suffix[0, nj]
            j = nj
    path[0] = j
    for i in range(1, h):
        best = INFINITY
        pick = j
        for nj in range(j - 1, j + 2):
            if 0 <= nj < w and suffix[i, nj] < best:
                best = suffix[i, nj]
                pick = nj
        j = pick
        path[i] = j
    return path_arr

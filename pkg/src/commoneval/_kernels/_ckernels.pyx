# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled familiarity and log-reduction kernels.

Must perform the same floating-point operations, in the same order, as
``_pykernels`` so both backends are bitwise interchangeable.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()


def familiarity_matrix(const cnp.int64_t[::1] items,
                       const cnp.int64_t[::1] offsets,
                       const cnp.int64_t[::1] item_cat_ptr,
                       const cnp.int64_t[::1] item_cat_idx,
                       const cnp.int64_t[::1] cat_sizes,
                       double gamma,
                       bint persist):
    cdef Py_ssize_t n_users = offsets.shape[0] - 1
    cdef Py_ssize_t n_cats = cat_sizes.shape[0]
    out_arr = np.zeros((n_users, n_cats), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t u, pos, start, stop, p, c, item
    cdef double g, tail
    with nogil:
        for u in range(n_users):
            start = offsets[u]
            stop = offsets[u + 1]
            # gamma ** N by the same repeated product used for the hit weights
            tail = 0.0
            if not persist:
                tail = 1.0
                for pos in range(start, stop):
                    tail = tail * gamma
            g = 1.0
            for pos in range(start, stop):
                item = items[pos]
                for p in range(item_cat_ptr[item], item_cat_ptr[item + 1]):
                    c = item_cat_idx[p]
                    out[u, c] = out[u, c] + (g - tail) / <double>cat_sizes[c]
                g = g * gamma
    return out_arr


def log_column_sums(const double[:, ::1] values):
    cdef Py_ssize_t n_rows = values.shape[0]
    cdef Py_ssize_t n_cols = values.shape[1]
    out_arr = np.zeros(n_cols, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r, c
    cdef double acc, v
    with nogil:
        for c in range(n_cols):
            acc = 0.0
            for r in range(n_rows):
                v = values[r, c]
                if v <= 0.0:
                    acc = -INFINITY
                    break
                acc = acc + log(v)
            out[c] = acc
    return out_arr

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled isolation-tree traversal kernel."""

import numpy as np

BACKEND = "compiled"


def tree_path_lengths(
    int[::1] feature,
    double[::1] threshold,
    int[::1] left,
    int[::1] right,
    double[::1] value,
    double[:, ::1] x,
):
    """Per-point path length (leaf depth + size adjustment) for one tree."""
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef int node, f
    with nogil:
        for i in range(n):
            node = 0
            f = feature[node]
            while f >= 0:
                if x[i, f] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feature[node]
            out[i] = value[node]
    return out_arr

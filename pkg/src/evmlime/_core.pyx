# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. ``_core_py`` holds the reference fallback with the
same signatures; ``_kernels`` picks one at import time."""

import numpy as np

from libc.math cimport log2
from libc.stdint cimport int64_t, uint64_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def sweep_histogram(const unsigned char[::1] code):
    """Opcode-byte histogram of a linear sweep (PUSH immediates skipped)."""
    counts = np.zeros(256, dtype=np.int64)
    cdef int64_t[::1] c = counts
    cdef Py_ssize_t i = 0, n = code.shape[0]
    cdef unsigned char op
    with nogil:
        while i < n:
            op = code[i]
            c[op] += 1
            if 0x60 <= op <= 0x7F:
                i += op - 0x5E
            else:
                i += 1
    return counts


def sweep_offsets(const unsigned char[::1] code):
    """Start offsets of every instruction reached by the linear sweep."""
    cdef Py_ssize_t n = code.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t i = 0, m = 0
    cdef unsigned char op
    with nogil:
        while i < n:
            o[m] = i
            m += 1
            op = code[i]
            if 0x60 <= op <= 0x7F:
                i += op - 0x5E
            else:
                i += 1
    return out[:m].copy()


cdef inline double _entropy(const int64_t* counts, int k, int64_t n) nogil:
    cdef double h = 0.0, p
    cdef int c
    if n == 0:
        return 0.0
    for c in range(k):
        if counts[c] > 0:
            p = <double>counts[c] / <double>n
            h -= p * log2(p)
    return h


def scan_boundaries(const double[::1] values, const int64_t[::1] codes, int n_classes):
    """Information gain at every boundary between distinct sorted values.

    ``values`` must be sorted ascending and ``codes`` aligned with it. Returns
    ``(positions, gains)`` where ``positions[j]`` is the index of the last
    element left of boundary ``j``.
    """
    cdef Py_ssize_t n = values.shape[0], i
    total_arr = np.zeros(n_classes, dtype=np.int64)
    left_arr = np.zeros(n_classes, dtype=np.int64)
    right_arr = np.zeros(n_classes, dtype=np.int64)
    cdef int64_t[::1] total = total_arr
    cdef int64_t[::1] left = left_arr
    cdef int64_t[::1] right = right_arr
    positions = np.empty(max(n - 1, 0), dtype=np.int64)
    gains = np.empty(max(n - 1, 0), dtype=np.float64)
    cdef int64_t[::1] pos = positions
    cdef double[::1] g = gains
    cdef Py_ssize_t m = 0
    cdef int c
    cdef double h_total, fl, fr
    for i in range(n):
        total[codes[i]] += 1
    h_total = _entropy(&total[0], n_classes, n)
    for i in range(n - 1):
        left[codes[i]] += 1
        if values[i + 1] == values[i]:
            continue
        for c in range(n_classes):
            right[c] = total[c] - left[c]
        fl = <double>(i + 1) / <double>n
        fr = <double>(n - i - 1) / <double>n
        pos[m] = i
        g[m] = h_total - fl * _entropy(&left[0], n_classes, i + 1) - fr * _entropy(&right[0], n_classes, n - i - 1)
        m += 1
    return positions[:m].copy(), gains[:m].copy()


def knn_positive_counts(const uint64_t[:, ::1] train, const unsigned char[::1] labels,
                        const uint64_t[:, ::1] queries, int k):
    """Count label-1 rows among each query's k nearest training rows.

    Rows are bit-packed; distance is Hamming (popcount of XOR). Ties at the
    cut-off distance go to the lower training index.
    """
    cdef Py_ssize_t n = train.shape[0], w = train.shape[1], q = queries.shape[0]
    cdef Py_ssize_t i, j, b
    cdef int max_d = <int>(64 * w)
    out = np.zeros(q, dtype=np.int64)
    cdef int64_t[::1] o = out
    dist_arr = np.empty(n, dtype=np.int32)
    hist_arr = np.empty(max_d + 1, dtype=np.int64)
    cdef int[::1] dist = dist_arr
    cdef int64_t[::1] hist = hist_arr
    cdef int d, radius
    cdef int64_t taken, need_at_radius, pos_count
    with nogil:
        for j in range(q):
            for b in range(max_d + 1):
                hist[b] = 0
            for i in range(n):
                d = 0
                for b in range(w):
                    d += __builtin_popcountll(train[i, b] ^ queries[j, b])
                dist[i] = d
                hist[d] += 1
            taken = 0
            radius = 0
            while radius <= max_d and taken + hist[radius] < k:
                taken += hist[radius]
                radius += 1
            need_at_radius = k - taken
            pos_count = 0
            for i in range(n):
                d = dist[i]
                if d < radius:
                    pos_count += labels[i]
                elif d == radius and need_at_radius > 0:
                    pos_count += labels[i]
                    need_at_radius -= 1
            o[j] = pos_count
    return out

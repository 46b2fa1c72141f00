# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the loops in ``_pykernels``.

Results must match the pure-Python versions bit for bit; the test suite runs
both side by side.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, NAN

cnp.import_array()


def apportion(raw, caps, long budget):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.ascontiguousarray(raw, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] c = np.ascontiguousarray(caps, dtype=np.int64)
    cdef Py_ssize_t m = r.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] n = np.empty(m, dtype=np.int64)
    cdef Py_ssize_t i, best
    cdef long v, residual = budget
    cdef double d, best_d

    for i in range(m):
        v = <long>floor(r[i])
        if v < 1:
            v = 1
        if v > c[i]:
            v = c[i]
        n[i] = v
        residual -= v

    while residual > 0:
        best = -1
        best_d = 0.0
        for i in range(m):
            if n[i] < c[i]:
                d = r[i] - <double>n[i]
                if best < 0 or d > best_d:
                    best = i
                    best_d = d
        n[best] += 1
        residual -= 1

    while residual < 0:
        best = -1
        best_d = 0.0
        for i in range(m - 1, -1, -1):
            if n[i] > 1:
                d = r[i] - <double>n[i]
                if best < 0 or d < best_d:
                    best = i
                    best_d = d
        n[best] -= 1
        residual += 1

    return n.tolist()


def midrank_auc(scores, labels):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sc = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.argsort(sc, kind="mergesort").astype(np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = sc[order]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] y = np.ascontiguousarray(labels, dtype=np.int64)[order]
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i = 0, j, k
    cdef long n_pos = 0, n_neg
    cdef double rank_sum = 0.0, midrank, u

    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        midrank = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            if y[k]:
                n_pos += 1
                rank_sum += midrank
        i = j + 1

    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        return NAN
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (<double>n_pos * <double>n_neg)


def count_in_intervals(frames, intervals):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] f = np.ascontiguousarray(frames, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] iv = np.ascontiguousarray(
        np.asarray(intervals, dtype=np.int64).reshape(-1, 2))
    cdef Py_ssize_t i, j = 0, n_f = f.shape[0], n_iv = iv.shape[0]
    cdef long hits = 0
    for i in range(n_f):
        while j < n_iv and iv[j, 1] < f[i]:
            j += 1
        if j == n_iv:
            break
        if iv[j, 0] <= f[i]:
            hits += 1
    return hits

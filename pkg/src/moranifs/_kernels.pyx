# cython: language_level=3
"""Compiled hot kernels; API mirrors ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

BACKEND = "cython"


def enumerate_cutset(double[:, :, ::1] logd, long[::1] sizes, double thr, long limit):
    cdef Py_ssize_t depth = logd.shape[0]
    cdef Py_ssize_t d = logd.shape[2]
    cdef Py_ssize_t level, a, j, i
    cdef long count = 0
    cdef Py_ssize_t cap = 1024
    cdef Py_ssize_t dcap = 8192
    cdef Py_ssize_t dpos = 0
    cdef double R, r, v

    cur_arr = np.full(depth + 1, -1, dtype=np.int64)
    sums_arr = np.zeros((depth + 1, d), dtype=np.float64)
    cdef long[::1] cur = cur_arr
    cdef double[:, ::1] sums = sums_arr

    digits_arr = np.empty(dcap, dtype=np.int32)
    offs_arr = np.empty(cap + 1, dtype=np.int64)
    R_arr = np.empty(cap, dtype=np.float64)
    r_arr = np.empty(cap, dtype=np.float64)
    cdef int[::1] digits = digits_arr
    cdef long[::1] offs = offs_arr
    cdef double[::1] Rv = R_arr
    cdef double[::1] rv = r_arr
    offs[0] = 0

    if depth == 0:
        return -2, None, np.array([0]), None, None
    level = 0
    while level >= 0:
        cur[level] += 1
        if cur[level] >= sizes[level]:
            cur[level] = -1
            level -= 1
            continue
        j = cur[level]
        R = -1e308
        r = 1e308
        for a in range(d):
            v = sums[level, a] + logd[level, j, a]
            sums[level + 1, a] = v
            if v > R:
                R = v
            if v < r:
                r = v
        if R <= thr:
            if count >= limit:
                return -1, None, np.array([count + 1]), None, None
            if count >= cap:
                cap *= 2
                offs_arr = np.resize(offs_arr, cap + 1)
                R_arr = np.resize(R_arr, cap)
                r_arr = np.resize(r_arr, cap)
                offs = offs_arr
                Rv = R_arr
                rv = r_arr
            if dpos + level + 1 > dcap:
                while dpos + level + 1 > dcap:
                    dcap *= 2
                digits_arr = np.resize(digits_arr, dcap)
                digits = digits_arr
            for i in range(level + 1):
                digits[dpos + i] = <int>cur[i]
            dpos += level + 1
            Rv[count] = R
            rv[count] = r
            count += 1
            offs[count] = dpos
        else:
            if level + 1 >= depth:
                return -2, None, np.array([count]), None, None
            level += 1
            cur[level] = -1
    return (0, digits_arr[:dpos].copy(), offs_arr[:count + 1].copy(),
            R_arr[:count].copy(), r_arr[:count].copy())


def moran_layers(double[::1] logr, double[::1] logm, long[::1] offsets, double s):
    cdef Py_ssize_t k = offsets.shape[0] - 1
    out_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, p
    cdef double mx, acc, v
    for i in range(k):
        mx = -1e308
        for p in range(offsets[i], offsets[i + 1]):
            v = s * logr[p] + logm[p]
            if v > mx:
                mx = v
        acc = 0.0
        for p in range(offsets[i], offsets[i + 1]):
            acc += exp(s * logr[p] + logm[p] - mx)
        out[i] = mx + log(acc)
    return out_arr


def moran_eval(double[::1] logr, double[::1] logm, long[::1] offsets, long k, double s):
    cdef Py_ssize_t i, p
    cdef double mx, den, num, v, e
    cdef double F = 0.0
    cdef double dF = 0.0
    for i in range(k):
        mx = -1e308
        for p in range(offsets[i], offsets[i + 1]):
            v = s * logr[p] + logm[p]
            if v > mx:
                mx = v
        den = 0.0
        num = 0.0
        for p in range(offsets[i], offsets[i + 1]):
            e = exp(s * logr[p] + logm[p] - mx)
            den += e
            num += e * logr[p]
        F += mx + log(den)
        dF += num / den
    return F, dF


cdef inline bint _touch(double[:, ::1] lo, double[:, ::1] hi, Py_ssize_t i, Py_ssize_t j,
                        Py_ssize_t d, double tol) nogil:
    cdef Py_ssize_t a
    for a in range(d):
        if lo[i, a] > hi[j, a] + tol or lo[j, a] > hi[i, a] + tol:
            return False
    return True


cdef inline Py_ssize_t _lower(long[::1] arr, long key) nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = arr.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def neighbor_counts(double[:, ::1] lo, double[:, ::1] hi, long[::1] labels, long n_labels,
                    long[::1] keys, long[::1] order, long[::1] sorted_keys, long[::1] deltas,
                    double tol):
    cdef Py_ssize_t w = lo.shape[0]
    cdef Py_ssize_t d = lo.shape[1]
    cdef Py_ssize_t nd = deltas.shape[0]
    counts_arr = np.zeros(w, dtype=np.int64)
    mark_arr = np.full(n_labels, -1, dtype=np.int64)
    cdef long[::1] counts = counts_arr
    cdef long[::1] mark = mark_arr
    cdef Py_ssize_t i, q, p, j
    cdef long tgt, c
    with nogil:
        for i in range(w):
            c = 0
            for q in range(nd):
                tgt = keys[i] + deltas[q]
                p = _lower(sorted_keys, tgt)
                while p < w and sorted_keys[p] == tgt:
                    j = order[p]
                    if mark[labels[j]] != i and _touch(lo, hi, i, j, d, tol):
                        mark[labels[j]] = i
                        c += 1
                    p += 1
            counts[i] = c
    return counts_arr


def neighbor_pairs(double[:, ::1] lo, double[:, ::1] hi, long[::1] keys, long[::1] order,
                   long[::1] sorted_keys, long[::1] deltas, double tol, long max_pairs):
    cdef Py_ssize_t w = lo.shape[0]
    cdef Py_ssize_t d = lo.shape[1]
    cdef Py_ssize_t nd = deltas.shape[0]
    cdef Py_ssize_t i, q, p, j
    cdef long tgt
    cdef Py_ssize_t n = 0
    cdef Py_ssize_t cap = 1024
    ia = np.empty(cap, dtype=np.int64)
    ja = np.empty(cap, dtype=np.int64)
    cdef long[::1] iv = ia
    cdef long[::1] jv = ja
    for i in range(w):
        for q in range(nd):
            tgt = keys[i] + deltas[q]
            p = _lower(sorted_keys, tgt)
            while p < w and sorted_keys[p] == tgt:
                j = order[p]
                if j > i and _touch(lo, hi, i, j, d, tol):
                    if n >= max_pairs:
                        return -1, None, None
                    if n >= cap:
                        cap *= 2
                        ia = np.resize(ia, cap)
                        ja = np.resize(ja, cap)
                        iv = ia
                        jv = ja
                    iv[n] = i
                    jv[n] = j
                    n += 1
                p += 1
    ia = ia[:n]
    ja = ja[:n]
    o = np.lexsort((ja, ia))
    return 0, ia[o], ja[o]

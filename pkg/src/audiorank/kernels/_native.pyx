# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: bounded top-k selection and LCS length.

Must stay result-identical to audiorank.kernels._fallback; the test suite
checks parity on random inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline bint _worse(double s1, long long i1, double s2, long long i2) noexcept:
    # Ordering for the selection heap: lower score is worse; on equal
    # scores a larger index is worse (ties resolve to ascending index).
    if s1 != s2:
        return s1 < s2
    return i1 > i2


cdef void _sift_down(double[::1] hs, long long[::1] hi, Py_ssize_t size, Py_ssize_t pos) noexcept:
    cdef Py_ssize_t child
    cdef double s = hs[pos]
    cdef long long ix = hi[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _worse(hs[child + 1], hi[child + 1], hs[child], hi[child]):
            child += 1
        if _worse(hs[child], hi[child], s, ix):
            hs[pos] = hs[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hs[pos] = s
    hi[pos] = ix


def topk_from_scores(double[::1] scores, Py_ssize_t k):
    """Indices of the k largest scores, score descending, ties by index ascending.

    O(n log k) min-heap selection; avoids sorting the full score array.
    """
    cdef Py_ssize_t n = scores.shape[0]
    if k > n:
        k = n
    if k <= 0:
        return np.empty(0, dtype=np.int64)

    cdef cnp.ndarray heap_s_arr = np.empty(k, dtype=np.float64)
    cdef cnp.ndarray heap_i_arr = np.empty(k, dtype=np.int64)
    cdef double[::1] hs = heap_s_arr
    cdef long long[::1] hi = heap_i_arr
    cdef Py_ssize_t i, pos

    for i in range(k):
        hs[i] = scores[i]
        hi[i] = i
    for pos in range(k // 2 - 1, -1, -1):
        _sift_down(hs, hi, k, pos)

    # The heap root is the worst kept candidate; replace it whenever a
    # strictly better candidate appears.
    for i in range(k, n):
        if _worse(hs[0], hi[0], scores[i], i):
            hs[0] = scores[i]
            hi[0] = i
            _sift_down(hs, hi, k, 0)

    cdef cnp.ndarray out_arr = np.empty(k, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t size = k
    for pos in range(k - 1, -1, -1):
        out[pos] = hi[0]
        size -= 1
        hs[0] = hs[size]
        hi[0] = hi[size]
        _sift_down(hs, hi, size, 0)
    return out_arr


def lcs_length(long long[::1] a, long long[::1] b):
    """Length of the longest common subsequence of two token-id sequences."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    if n == 0 or m == 0:
        return 0

    cdef cnp.ndarray prev_arr = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.ndarray curr_arr = np.zeros(m + 1, dtype=np.int64)
    cdef long long[::1] prev = prev_arr
    cdef long long[::1] curr = curr_arr
    cdef long long[::1] tmp
    cdef Py_ssize_t i, j
    cdef long long ai, left, up

    for i in range(n):
        ai = a[i]
        curr[0] = 0
        for j in range(m):
            if b[j] == ai:
                curr[j + 1] = prev[j] + 1
            else:
                left = curr[j]
                up = prev[j + 1]
                curr[j + 1] = up if up >= left else left
        tmp = prev
        prev = curr
        curr = tmp
    return int(prev[m])

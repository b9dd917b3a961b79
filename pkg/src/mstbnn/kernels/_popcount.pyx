# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled popcount kernels: total popcount and pairwise XOR-popcount."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    #  define MSTBNN_POPCOUNT64(x) __builtin_popcountll(x)
    #else
    static int MSTBNN_POPCOUNT64(unsigned long long x) {
        x = x - ((x >> 1) & 0x5555555555555555ULL);
        x = (x & 0x3333333333333333ULL) + ((x >> 2) & 0x3333333333333333ULL);
        x = (x + (x >> 4)) & 0x0f0f0f0f0f0f0f0fULL;
        return (int)((x * 0x0101010101010101ULL) >> 56);
    }
    #endif
    """
    int MSTBNN_POPCOUNT64(unsigned long long x) nogil

BACKEND = "cython"


def popcount_words(words):
    """Total number of set bits in a 1-D uint64 array."""
    cdef cnp.uint64_t[::1] w = np.ascontiguousarray(words, dtype=np.uint64)
    cdef Py_ssize_t i, n = w.shape[0]
    cdef long long total = 0
    with nogil:
        for i in range(n):
            total += MSTBNN_POPCOUNT64(w[i])
    return total


def xor_popcount_rows(a, b):
    """Pairwise popcount(a[i] ^ b[j]) for two (rows, words) uint64 arrays."""
    cdef cnp.uint64_t[:, ::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef cnp.uint64_t[:, ::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    if av.shape[1] != bv.shape[1]:
        raise ValueError("word-count mismatch")
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0], nw = av.shape[1]
    out = np.empty((na, nb), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef long long acc
    with nogil:
        for i in range(na):
            for j in range(nb):
                acc = 0
                for k in range(nw):
                    acc += MSTBNN_POPCOUNT64(av[i, k] ^ bv[j, k])
                ov[i, j] = acc
    return out

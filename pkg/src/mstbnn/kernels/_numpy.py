"""Pure-numpy fallback for the popcount kernels.

Relies on ``np.bitwise_count`` (numpy >= 2.0).  Same contracts as the
compiled module in ``_popcount.pyx``.
"""

import numpy as np

BACKEND = "numpy"


def popcount_words(words):
    """Total number of set bits in a 1-D uint64 array."""
    return int(np.bitwise_count(np.ascontiguousarray(words, dtype=np.uint64)).sum())


def xor_popcount_rows(a, b):
    """Pairwise popcount(a[i] ^ b[j]) for two (rows, words) uint64 arrays.

    Returns an (a.rows, b.rows) int64 matrix.  With a == b this is the
    Hamming-distance matrix of the packed rows.
    """
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    if a.shape[1] != b.shape[1]:
        raise ValueError("word-count mismatch")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.int64)
    # Chunk over rows of a to bound the broadcast temporary.
    chunk = max(1, (1 << 22) // max(1, b.size))
    for lo in range(0, a.shape[0], chunk):
        hi = min(lo + chunk, a.shape[0])
        x = a[lo:hi, None, :] ^ b[None, :, :]
        out[lo:hi] = np.bitwise_count(x).sum(axis=2, dtype=np.int64)
    return out

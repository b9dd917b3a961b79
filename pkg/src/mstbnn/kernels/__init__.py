"""Popcount kernels: compiled Cython core with a numpy fallback.

The compiled module is preferred when the extension built; both expose the
same functions and are interchangeable (the test suite runs both when
available).  ``BACKEND`` names the one selected at import.
"""

try:
    from mstbnn.kernels import _popcount as _impl
except ImportError:  # extension not built
    from mstbnn.kernels import _numpy as _impl

BACKEND = _impl.BACKEND
popcount_words = _impl.popcount_words
xor_popcount_rows = _impl.xor_popcount_rows

__all__ = ["BACKEND", "popcount_words", "xor_popcount_rows"]

"""Bit-packed binary tensor types and sign binarization.

Conventions, fixed for the whole package:
  * bit 1 encodes +1, bit 0 encodes -1
  * bits are packed LSB-first into little-endian 64-bit words; pad bits in
    the last word are zero
  * weight index order is (input channel, kernel row, kernel col), row-major;
    activation index order is (input channel, row, col), row-major
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mstbnn import kernels

WORD_BITS = 64


def n_words(nbits: int) -> int:
    return (nbits + WORD_BITS - 1) // WORD_BITS


def n_bytes(nbits: int) -> int:
    return (nbits + 7) // 8


def pack_bits(bits) -> np.ndarray:
    """Pack a 0/1 (or bool) array into LSB-first uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    raw = np.packbits(bits, bitorder="little")
    buf = np.zeros(n_words(bits.size) * 8, dtype=np.uint8)
    buf[: raw.size] = raw
    return buf.view("<u8")


def unpack_bits(words: np.ndarray, nbits: int) -> np.ndarray:
    """Inverse of pack_bits; returns a uint8 0/1 array of length nbits."""
    raw = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(raw, count=nbits, bitorder="little")


def words_to_bytes(words: np.ndarray, nbits: int) -> bytes:
    return np.ascontiguousarray(words, dtype="<u8").view(np.uint8)[: n_bytes(nbits)].tobytes()


def bytes_to_words(data: bytes, nbits: int) -> np.ndarray:
    if len(data) != n_bytes(nbits):
        raise ValueError(f"expected {n_bytes(nbits)} bytes, got {len(data)}")
    buf = np.zeros(n_words(nbits) * 8, dtype=np.uint8)
    buf[: len(data)] = np.frombuffer(data, dtype=np.uint8)
    words = buf.view("<u8").copy()
    _check_pad_bits(words, nbits)
    return words


def _check_pad_bits(words: np.ndarray, nbits: int) -> None:
    rem = nbits % WORD_BITS
    if words.size and rem:
        if int(words[-1]) >> rem:
            raise ValueError("nonzero pad bits past the end of the bit vector")


def sign_binarize(x) -> np.ndarray:
    """Binarize reals to packed bits: bit 1 where x >= 0, bit 0 where x < 0."""
    x = np.asarray(x, dtype=np.float64).ravel()
    bad = ~np.isfinite(x)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"non-finite value at index {i}")
    return pack_bits(x >= 0.0)


@dataclass(frozen=True)
class LayerShape:
    """Static geometry of one binary convolution layer (stride fixed at 1)."""

    c_out: int
    c_in: int
    m: int
    h_in: int
    w_in: int
    pad: int = 1

    def __post_init__(self):
        if self.c_out < 1 or self.c_in < 1:
            raise ValueError("channel counts must be >= 1")
        if self.m < 1 or self.m % 2 == 0:
            raise ValueError("kernel size must be odd and >= 1")
        if self.h_in < 1 or self.w_in < 1:
            raise ValueError("input dims must be >= 1")
        if self.pad < 0:
            raise ValueError("pad must be >= 0")
        if self.h_out < 1 or self.w_out < 1:
            raise ValueError("output dims must be >= 1")

    @property
    def full(self) -> int:
        """XNOR count of one fully computed output channel: c_in * m * m."""
        return self.c_in * self.m * self.m

    @property
    def h_out(self) -> int:
        return self.h_in + 2 * self.pad - self.m + 1

    @property
    def w_out(self) -> int:
        return self.w_in + 2 * self.pad - self.m + 1

    @property
    def act_bits(self) -> int:
        return self.c_in * self.h_in * self.w_in


@dataclass(frozen=True)
class BinaryWeightSet:
    """Packed +-1 weight vector of one output channel (c_in*m*m bits)."""

    words: np.ndarray
    shape: LayerShape

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype="<u8")
        if words.size != n_words(self.shape.full):
            raise ValueError("wrong word count for layer shape")
        _check_pad_bits(words, self.shape.full)
        object.__setattr__(self, "words", words)

    @property
    def nbits(self) -> int:
        return self.shape.full

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.nbits)

    def signs(self) -> np.ndarray:
        """Decode to +-1 integers."""
        return self.bits().astype(np.int64) * 2 - 1

    def __eq__(self, other):
        if not isinstance(other, BinaryWeightSet):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.words, other.words)


def hamming(a: BinaryWeightSet, b: BinaryWeightSet) -> int:
    """Number of differing bit positions between two equal-length weight sets."""
    if a.nbits != b.nbits:
        raise ValueError(f"length mismatch: {a.nbits} vs {b.nbits}")
    return kernels.popcount_words(np.bitwise_xor(a.words, b.words))


@dataclass(frozen=True)
class BinaryLayer:
    """One binary convolution layer: c_out weight sets plus the scaling factor."""

    shape: LayerShape
    weights: tuple = field(default_factory=tuple)
    alpha: float = 1.0

    def __post_init__(self):
        weights = tuple(self.weights)
        if len(weights) != self.shape.c_out:
            raise ValueError("weight set count must equal c_out")
        for w in weights:
            if w.shape != self.shape:
                raise ValueError("weight set shape mismatch")
        object.__setattr__(self, "weights", weights)

    def packed_matrix(self) -> np.ndarray:
        """All weight sets as a (c_out, words) uint64 matrix."""
        return np.vstack([w.words for w in self.weights])

    def __eq__(self, other):
        if not isinstance(other, BinaryLayer):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.alpha == other.alpha
            and all(a == b for a, b in zip(self.weights, other.weights))
        )


@dataclass(frozen=True)
class BinaryActivationMap:
    """Packed +-1 input feature maps (c_in * h_in * w_in bits).

    Padding pixels are never stored; convolution materializes them as -1.
    """

    words: np.ndarray
    c_in: int
    h_in: int
    w_in: int

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype="<u8")
        if words.size != n_words(self.nbits):
            raise ValueError("wrong word count for activation dims")
        _check_pad_bits(words, self.nbits)
        object.__setattr__(self, "words", words)

    @property
    def nbits(self) -> int:
        return self.c_in * self.h_in * self.w_in

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.nbits).reshape(self.c_in, self.h_in, self.w_in)

    def __eq__(self, other):
        if not isinstance(other, BinaryActivationMap):
            return NotImplemented
        return (
            (self.c_in, self.h_in, self.w_in) == (other.c_in, other.h_in, other.w_in)
            and np.array_equal(self.words, other.words)
        )


def layer_from_bits(bits, shape: LayerShape, alpha: float = 1.0) -> BinaryLayer:
    """Build a layer from a (c_out, full) 0/1 array."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(shape.c_out, shape.full)
    weights = [BinaryWeightSet(pack_bits(row), shape) for row in bits]
    return BinaryLayer(shape, weights, alpha)


def random_layer(shape: LayerShape, seed: int = 0, alpha: float = 1.0) -> BinaryLayer:
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(shape.c_out, shape.full), dtype=np.uint8)
    return layer_from_bits(bits, shape, alpha)


def random_activation(shape: LayerShape, seed: int = 0) -> BinaryActivationMap:
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=shape.act_bits, dtype=np.uint8)
    return BinaryActivationMap(pack_bits(bits), shape.c_in, shape.h_in, shape.w_in)

"""File formats: BWT1 weight files, BAC1 activation files, text import.

BWT1: magic "BWT1"; little-endian u32 c_out, c_in, m, h_in, w_in, pad;
little-endian f64 alpha; then c_out records of ceil(c_in*m*m / 8) bytes,
bits LSB-first.

BAC1: magic "BAC1"; u32 c_in, h_in, w_in; ceil(c_in*h_in*w_in / 8) bytes,
bits LSB-first.

Text import: header line "c_out c_in m", then one line per weight set of
space-separated +1/-1 tokens.
"""

from __future__ import annotations

import contextlib
import struct

import numpy as np

from mstbnn.core import (
    BinaryActivationMap,
    BinaryLayer,
    BinaryWeightSet,
    LayerShape,
    bytes_to_words,
    n_bytes,
    pack_bits,
    words_to_bytes,
)

BWT_MAGIC = b"BWT1"
BAC_MAGIC = b"BAC1"

# Sanity cap on header fields; anything larger is a corrupt or hostile file.
MAX_DIM = 1 << 20


class FormatError(ValueError):
    """Malformed input file."""


class BadMagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


@contextlib.contextmanager
def _open(f, mode):
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f, mode) as fh:
            yield fh
    else:
        yield f


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedError(f"truncated {what}")
    return data


def write_bwt(layer: BinaryLayer, sink) -> None:
    s = layer.shape
    with _open(sink, "wb") as fh:
        fh.write(BWT_MAGIC)
        fh.write(struct.pack("<6I", s.c_out, s.c_in, s.m, s.h_in, s.w_in, s.pad))
        fh.write(struct.pack("<d", layer.alpha))
        for w in layer.weights:
            fh.write(words_to_bytes(w.words, s.full))


def read_bwt(source) -> BinaryLayer:
    with _open(source, "rb") as fh:
        magic = _read_exact(fh, 4, "header")
        if magic != BWT_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        fields = struct.unpack("<6I", _read_exact(fh, 24, "header"))
        if any(v > MAX_DIM for v in fields):
            raise FormatError(f"shape overflow in header: {fields}")
        try:
            shape = LayerShape(*fields)
        except ValueError as exc:
            raise FormatError(f"invalid shape in header: {exc}") from exc
        (alpha,) = struct.unpack("<d", _read_exact(fh, 8, "header"))
        rec = n_bytes(shape.full)
        weights = []
        for k in range(shape.c_out):
            data = fh.read(rec)
            if len(data) != rec:
                raise TruncatedError(f"truncated at channel {k}")
            try:
                words = bytes_to_words(data, shape.full)
            except ValueError as exc:
                raise FormatError(f"channel {k}: {exc}") from exc
            weights.append(BinaryWeightSet(words, shape))
        return BinaryLayer(shape, weights, alpha)


def write_bac(act: BinaryActivationMap, sink) -> None:
    with _open(sink, "wb") as fh:
        fh.write(BAC_MAGIC)
        fh.write(struct.pack("<3I", act.c_in, act.h_in, act.w_in))
        fh.write(words_to_bytes(act.words, act.nbits))


def read_bac(source) -> BinaryActivationMap:
    with _open(source, "rb") as fh:
        magic = _read_exact(fh, 4, "header")
        if magic != BAC_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        c_in, h_in, w_in = struct.unpack("<3I", _read_exact(fh, 12, "header"))
        if any(v == 0 or v > MAX_DIM for v in (c_in, h_in, w_in)):
            raise FormatError(f"invalid dims in header: {(c_in, h_in, w_in)}")
        nbits = c_in * h_in * w_in
        data = fh.read(n_bytes(nbits))
        if len(data) != n_bytes(nbits):
            raise TruncatedError("truncated activation payload")
        try:
            words = bytes_to_words(data, nbits)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
        return BinaryActivationMap(words, c_in, h_in, w_in)


def write_text_weights(layer: BinaryLayer, sink) -> None:
    s = layer.shape
    with _open(sink, "w") as fh:
        fh.write(f"{s.c_out} {s.c_in} {s.m}\n")
        for w in layer.weights:
            fh.write(" ".join("+1" if b else "-1" for b in w.bits()))
            fh.write("\n")


def read_text_weights(source, h_in: int = 32, w_in: int = 32, pad: int | None = None,
                      alpha: float = 1.0) -> BinaryLayer:
    """Parse the plain-text weight format.

    The text header carries no spatial dims, so h_in/w_in are parameters;
    pad defaults to same-padding (m-1)//2.
    """
    with _open(source, "r") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise FormatError("expected header 'c_out c_in m'")
        try:
            c_out, c_in, m = (int(t) for t in header)
        except ValueError as exc:
            raise FormatError(f"bad header: {exc}") from exc
        if pad is None:
            pad = (m - 1) // 2
        try:
            shape = LayerShape(c_out, c_in, m, h_in, w_in, pad)
        except ValueError as exc:
            raise FormatError(f"invalid shape: {exc}") from exc
        weights = []
        for k in range(c_out):
            tokens = fh.readline().split()
            if not tokens:
                raise TruncatedError(f"truncated at channel {k}")
            if len(tokens) != shape.full:
                raise FormatError(
                    f"channel {k}: expected {shape.full} tokens, got {len(tokens)}"
                )
            bits = np.empty(shape.full, dtype=np.uint8)
            for i, t in enumerate(tokens):
                if t == "+1" or t == "1":
                    bits[i] = 1
                elif t == "-1":
                    bits[i] = 0
                else:
                    raise FormatError(f"channel {k}: bad token {t!r}")
            weights.append(BinaryWeightSet(pack_bits(bits), shape))
        return BinaryLayer(shape, weights, alpha)

"""Bit-exact binary convolution: direct XNOR-popcount and schedule reuse.

Both paths produce identical integer outputs; `assert_equivalent` checks
that on concrete inputs.  Padding pixels enter the windows as -1 (bit 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mstbnn import kernels
from mstbnn.core import (
    BinaryActivationMap,
    BinaryLayer,
    LayerShape,
    n_words,
    pack_bits,
)
from mstbnn.formats import _open
from mstbnn.graph import NO_PARENT
from mstbnn.schedule import ComputeSchedule


@dataclass(frozen=True)
class OutputMap:
    """Integer outputs before the scaling factor, plus the factor itself."""

    values: np.ndarray  # (c_out, h_out, w_out) int64, Y = 2P - full
    alpha: float

    def real_values(self) -> np.ndarray:
        return self.values * self.alpha


def _check_shapes(shape: LayerShape, act: BinaryActivationMap) -> None:
    if (act.c_in, act.h_in, act.w_in) != (shape.c_in, shape.h_in, shape.w_in):
        raise ValueError(
            f"activation dims {(act.c_in, act.h_in, act.w_in)} do not match "
            f"layer {(shape.c_in, shape.h_in, shape.w_in)}"
        )


def im2col_bits(shape: LayerShape, act: BinaryActivationMap) -> np.ndarray:
    """Window bits per output pixel: (h_out*w_out, full) uint8, pad bits 0."""
    _check_shapes(shape, act)
    padded = np.zeros(
        (shape.c_in, shape.h_in + 2 * shape.pad, shape.w_in + 2 * shape.pad),
        dtype=np.uint8,
    )
    padded[:, shape.pad:shape.pad + shape.h_in, shape.pad:shape.pad + shape.w_in] = act.bits()
    win = np.lib.stride_tricks.sliding_window_view(padded, (shape.m, shape.m), axis=(1, 2))
    # (c_in, h_out, w_out, m, m) -> (pixel, c_in*m*m) in weight index order
    win = win.transpose(1, 2, 0, 3, 4)
    return np.ascontiguousarray(win.reshape(shape.h_out * shape.w_out, shape.full))


def _pack_rows(bits: np.ndarray, nbits: int) -> np.ndarray:
    raw = np.packbits(bits, axis=1, bitorder="little")
    buf = np.zeros((bits.shape[0], n_words(nbits) * 8), dtype=np.uint8)
    buf[:, : raw.shape[1]] = raw
    return buf.view("<u8")


def direct_conv(layer: BinaryLayer, act: BinaryActivationMap) -> OutputMap:
    """Eq-by-the-book path: full XNOR popcount per channel and pixel."""
    shape = layer.shape
    cols = im2col_bits(shape, act)
    packed_cols = _pack_rows(cols, shape.full)
    # agreements = full - popcount(xor); pad bits are 0 on both sides
    pops = shape.full - kernels.xor_popcount_rows(layer.packed_matrix(), packed_cols)
    values = (2 * pops - shape.full).reshape(shape.c_out, shape.h_out, shape.w_out)
    return OutputMap(values, layer.alpha)


def reuse_eval(schedule: ComputeSchedule, act: BinaryActivationMap) -> OutputMap:
    """Reuse path: roots by full popcount, children from the parent popcount.

    For a child j with parent i and d differing positions:
    P_j = P_i - d + 2 * P_ij, with P_ij the popcount of XNORs at the
    differing positions only.
    """
    shape = schedule.shape
    cols = im2col_bits(shape, act)
    npix = cols.shape[0]
    pops = np.empty((shape.c_out, npix), dtype=np.int64)
    root_ids = schedule.roots
    root_words = np.vstack([schedule.layer.weights[r].words for r in root_ids])
    packed_cols = _pack_rows(cols, shape.full)
    pops[root_ids] = shape.full - kernels.xor_popcount_rows(root_words, packed_cols)
    for v in schedule.eval_order:
        v = int(v)
        p = int(schedule.parent[v])
        if p == NO_PARENT:
            continue
        pos = schedule.diff_positions[v]
        bits = schedule.diff_bits[v]
        d = int(pos.size)
        if d == 0:
            pops[v] = pops[p]
            continue
        p_ij = (cols[:, pos] == bits).sum(axis=1, dtype=np.int64)
        pops[v] = pops[p] - d + 2 * p_ij
    values = (2 * pops - shape.full).reshape(shape.c_out, shape.h_out, shape.w_out)
    return OutputMap(values, schedule.layer.alpha)


@dataclass(frozen=True)
class EquivalenceReport:
    max_abs_diff: np.ndarray  # per channel, integer domain

    @property
    def passed(self) -> bool:
        return bool((self.max_abs_diff == 0).all())

    def failing_channels(self) -> list[int]:
        return [int(c) for c in np.flatnonzero(self.max_abs_diff != 0)]


def assert_equivalent(layer: BinaryLayer, act: BinaryActivationMap,
                      schedule: ComputeSchedule) -> EquivalenceReport:
    """Compare the direct and reuse paths channel by channel."""
    if schedule.layer.shape != layer.shape:
        raise ValueError("schedule shape does not match layer")
    direct = direct_conv(layer, act)
    reused = reuse_eval(schedule, act)
    diff = np.abs(direct.values - reused.values).reshape(layer.shape.c_out, -1)
    return EquivalenceReport(diff.max(axis=1))


def write_output_map(out: OutputMap, sink) -> None:
    """Structured text: alpha header, then 'channel y x value' integer lines."""
    with _open(sink, "w") as fh:
        fh.write(f"alpha={out.alpha!r}\n")
        c_out, h, w = out.values.shape
        for c in range(c_out):
            for y in range(h):
                for x in range(w):
                    fh.write(f"{c} {y} {x} {int(out.values[c, y, x])}\n")


def read_output_map(source) -> OutputMap:
    with _open(source, "r") as fh:
        header = fh.readline().strip()
        if not header.startswith("alpha="):
            raise ValueError("missing alpha header")
        alpha = float(header[len("alpha="):])
        entries = {}
        for ln in fh:
            c, y, x, v = ln.split()
            entries[(int(c), int(y), int(x))] = int(v)
    if not entries:
        raise ValueError("empty output map")
    c_out = max(k[0] for k in entries) + 1
    h = max(k[1] for k in entries) + 1
    w = max(k[2] for k in entries) + 1
    values = np.zeros((c_out, h, w), dtype=np.int64)
    for (c, y, x), v in entries.items():
        values[c, y, x] = v
    return OutputMap(values, alpha)

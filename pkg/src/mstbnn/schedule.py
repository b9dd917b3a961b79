"""Executable compute schedules and their cost models.

A schedule fixes the evaluation order of output channels.  Root channels
carry their full weight sets; every other channel carries only the
positions where its weights differ from its parent's, plus its own bit at
each such position.  Applying those diff lists down the tree reconstructs
the whole layer, and evaluation reuses the parent's popcount.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from mstbnn.core import BinaryLayer, LayerShape, unpack_bits
from mstbnn.formats import FormatError, TruncatedError, _open
from mstbnn.graph import NO_PARENT, SpanningTree
from mstbnn.baselines import StarForest

KINDS = ("standard", "mst", "kmedoid", "hampath")


@dataclass
class ComputeSchedule:
    layer: BinaryLayer
    kind: str
    parent: np.ndarray  # NO_PARENT for roots
    diff_positions: list  # per channel: int64 array, or None for roots
    diff_bits: list  # per channel: uint8 array aligned with diff_positions

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        self.parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        c_out = self.layer.shape.c_out
        full = self.layer.shape.full
        if self.parent.size != c_out:
            raise ValueError("parent array length must equal c_out")
        if len(self.diff_positions) != c_out or len(self.diff_bits) != c_out:
            raise ValueError("diff lists must cover every channel")
        for v in range(c_out):
            p = int(self.parent[v])
            if p == NO_PARENT:
                if self.diff_positions[v] is not None:
                    raise ValueError(f"root channel {v} must not carry a diff list")
                continue
            if not (0 <= p < c_out):
                raise ValueError(f"channel {v}: parent {p} out of range")
            pos = np.ascontiguousarray(self.diff_positions[v], dtype=np.int64)
            bits = np.ascontiguousarray(self.diff_bits[v], dtype=np.uint8)
            if pos.size != bits.size:
                raise ValueError(f"channel {v}: diff positions and bits disagree")
            if pos.size and (pos.min() < 0 or pos.max() >= full):
                raise ValueError(f"channel {v}: diff position out of range")
            if pos.size > 1 and (np.diff(pos) <= 0).any():
                raise ValueError(f"channel {v}: diff positions must be strictly increasing")
            self.diff_positions[v] = pos
            self.diff_bits[v] = bits
        self.eval_order = self._toposort()

    def _toposort(self) -> np.ndarray:
        c_out = self.parent.size
        kids: list[list[int]] = [[] for _ in range(c_out)]
        roots = []
        for v in range(c_out):
            p = int(self.parent[v])
            if p == NO_PARENT:
                roots.append(v)
            else:
                kids[p].append(v)
        order = list(roots)
        for u in order:
            order.extend(kids[u])
        if len(order) != c_out:
            raise ValueError("parent links contain a cycle")
        return np.asarray(order, dtype=np.int64)

    @property
    def shape(self) -> LayerShape:
        return self.layer.shape

    @property
    def roots(self) -> list[int]:
        return [int(v) for v in np.flatnonzero(self.parent == NO_PARENT)]

    def depths(self) -> np.ndarray:
        depth = np.zeros(self.parent.size, dtype=np.int64)
        for v in self.eval_order:
            p = int(self.parent[v])
            if p != NO_PARENT:
                depth[v] = depth[p] + 1
        return depth

    def __eq__(self, other):
        if not isinstance(other, ComputeSchedule):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.layer == other.layer
            and np.array_equal(self.parent, other.parent)
            and all(
                (a is None and b is None)
                or (a is not None and b is not None and np.array_equal(a, b))
                for a, b in zip(self.diff_positions, other.diff_positions)
            )
            and all(
                (a is None and b is None)
                or (a is not None and b is not None and np.array_equal(a, b))
                for a, b in zip(self.diff_bits, other.diff_bits)
            )
        )


@dataclass
class CostReport:
    method: str
    params_bits: int
    xnor_per_pixel: int
    bitops_total: int
    ratio: float
    depth: int
    sync_registers: int
    exploration_seconds: float

    CSV_HEADER = (
        "method,params_bits,xnor_per_pixel,bitops_total,ratio,depth,"
        "sync_registers,exploration_seconds"
    )

    def csv_row(self) -> str:
        return (
            f"{self.method},{self.params_bits},{self.xnor_per_pixel},"
            f"{self.bitops_total},{self.ratio:.6f},{self.depth},"
            f"{self.sync_registers},{self.exploration_seconds:.6f}"
        )


def _diff_list(parent_words, child_words, full):
    xor = np.bitwise_xor(parent_words, child_words)
    pos = np.flatnonzero(unpack_bits(xor, full)).astype(np.int64)
    child_bits = unpack_bits(child_words, full)
    return pos, child_bits[pos]


def schedule_from_tree(t: SpanningTree, layer: BinaryLayer, kind: str = "mst") -> ComputeSchedule:
    if t.n != layer.shape.c_out:
        raise ValueError("tree vertex count must equal c_out")
    full = layer.shape.full
    positions: list = [None] * t.n
    bits: list = [None] * t.n
    for v in range(t.n):
        p = int(t.parent[v])
        if p == NO_PARENT:
            continue
        positions[v], bits[v] = _diff_list(
            layer.weights[p].words, layer.weights[v].words, full
        )
    return ComputeSchedule(layer, kind, t.parent.copy(), positions, bits)


def schedule_from_forest(f: StarForest, layer: BinaryLayer) -> ComputeSchedule:
    if f.n != layer.shape.c_out:
        raise ValueError("forest vertex count must equal c_out")
    full = layer.shape.full
    parent = np.full(f.n, NO_PARENT, dtype=np.int64)
    positions: list = [None] * f.n
    bits: list = [None] * f.n
    for v in range(f.n):
        c = int(f.assign[v])
        if c == v:
            continue
        parent[v] = c
        positions[v], bits[v] = _diff_list(
            layer.weights[c].words, layer.weights[v].words, full
        )
    return ComputeSchedule(layer, "kmedoid", parent, positions, bits)


def standard_schedule(layer: BinaryLayer) -> ComputeSchedule:
    c_out = layer.shape.c_out
    parent = np.full(c_out, NO_PARENT, dtype=np.int64)
    return ComputeSchedule(layer, "standard", parent, [None] * c_out, [None] * c_out)


def params_bits(s: ComputeSchedule) -> int:
    """Weight bits feeding XNOR gates: one full kernel per root plus diffs."""
    total = len(s.roots) * s.shape.full
    total += sum(int(p.size) for p in s.diff_positions if p is not None)
    return total


def xnor_per_pixel(s: ComputeSchedule) -> int:
    return params_bits(s)


def compression_ratio(s: ComputeSchedule) -> float:
    return params_bits(s) / (s.shape.c_out * s.shape.full)


def bitops_total(s: ComputeSchedule) -> int:
    return xnor_per_pixel(s) * s.shape.h_out * s.shape.w_out


def schedule_depth(s: ComputeSchedule) -> int:
    return int(s.depths().max())


def register_estimate(s: ComputeSchedule, adders_per_stage: int = 1) -> int:
    """Synchronization flip-flop estimate.

    Channels finishing at an earlier pipeline stage idle until the deepest
    one is done; each idle stage costs one register.  adders_per_stage
    folds that many tree levels into one clock period.
    """
    if adders_per_stage < 1:
        raise ValueError("adders_per_stage must be >= 1")
    stage = s.depths() // adders_per_stage
    return int((stage.max() - stage).sum())


def cost_report(s: ComputeSchedule, adders_per_stage: int = 1,
                exploration_seconds: float = 0.0) -> CostReport:
    return CostReport(
        method=s.kind,
        params_bits=params_bits(s),
        xnor_per_pixel=xnor_per_pixel(s),
        bitops_total=bitops_total(s),
        ratio=compression_ratio(s),
        depth=schedule_depth(s),
        sync_registers=register_estimate(s, adders_per_stage),
        exploration_seconds=exploration_seconds,
    )


def write_schedule(s: ComputeSchedule, sink) -> None:
    sh = s.shape
    with _open(sink, "w") as fh:
        fh.write("version=1\n")
        fh.write(f"kind={s.kind}\n")
        fh.write(f"shape={sh.c_out} {sh.c_in} {sh.m} {sh.h_in} {sh.w_in} {sh.pad}\n")
        fh.write("roots=" + " ".join(str(r) for r in s.roots) + "\n")
        for v in s.eval_order:
            v = int(v)
            p = int(s.parent[v])
            if p == NO_PARENT:
                continue
            pairs = " ".join(
                f"{int(pos)}:{int(b)}"
                for pos, b in zip(s.diff_positions[v], s.diff_bits[v])
            )
            k = int(s.diff_positions[v].size)
            fh.write(f"{v} {p} {k}" + (f" {pairs}" if pairs else "") + "\n")


def _parse_kv(line: str, key: str) -> str:
    if not line.startswith(key + "="):
        raise FormatError(f"expected '{key}=...', got {line!r}")
    return line[len(key) + 1:].strip()


def read_schedule(source, layer: BinaryLayer) -> ComputeSchedule:
    """Parse a schedule file; root weights are rebound from the given layer.

    Diff bits are taken from the file as-is, so a corrupted file yields a
    schedule whose evaluation disagrees with the layer (detectable by the
    equivalence check) rather than a parse error.
    """
    with _open(source, "r") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if len(lines) < 4:
        raise TruncatedError("truncated schedule header")
    version = _parse_kv(lines[0], "version")
    if version != "1":
        raise FormatError(f"unsupported schedule version {version!r}")
    kind = _parse_kv(lines[1], "kind")
    if kind not in KINDS:
        raise FormatError(f"unknown schedule kind {kind!r}")
    try:
        shape_fields = [int(t) for t in _parse_kv(lines[2], "shape").split()]
    except ValueError as exc:
        raise FormatError(f"bad shape line: {exc}") from exc
    if len(shape_fields) != 6:
        raise FormatError("shape line must carry 6 fields")
    shape = LayerShape(*shape_fields)
    if shape != layer.shape:
        raise FormatError(f"schedule shape {shape} does not match layer {layer.shape}")
    try:
        roots = [int(t) for t in _parse_kv(lines[3], "roots").split()]
    except ValueError as exc:
        raise FormatError(f"bad root list: {exc}") from exc
    c_out = shape.c_out
    parent = np.full(c_out, NO_PARENT, dtype=np.int64)
    positions: list = [None] * c_out
    bits: list = [None] * c_out
    seen = set(roots)
    if not roots or any(not (0 <= r < c_out) for r in roots):
        raise FormatError("root list empty or out of range")
    for ln in lines[4:]:
        if not ln.strip():
            continue
        tokens = ln.split()
        if len(tokens) < 3:
            raise FormatError(f"bad schedule record {ln!r}")
        try:
            child, par, k = int(tokens[0]), int(tokens[1]), int(tokens[2])
            pairs = [t.split(":") for t in tokens[3:]]
            pos = np.asarray([int(p) for p, _ in pairs], dtype=np.int64)
            pbits = np.asarray([int(b) for _, b in pairs], dtype=np.uint8)
        except ValueError as exc:
            raise FormatError(f"bad schedule record {ln!r}: {exc}") from exc
        if len(pairs) != k:
            raise FormatError(f"channel {child}: record announces {k} pairs, has {len(pairs)}")
        if not (0 <= child < c_out) or child in seen:
            raise FormatError(f"channel {child}: duplicate or out of range")
        if (pbits > 1).any():
            raise FormatError(f"channel {child}: bits must be 0 or 1")
        seen.add(child)
        parent[child] = par
        positions[child] = pos
        bits[child] = pbits
    if len(seen) != c_out:
        raise TruncatedError(f"schedule covers {len(seen)} of {c_out} channels")
    try:
        return ComputeSchedule(layer, kind, parent, positions, bits)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def make_schedule(layer: BinaryLayer, method: str, r: int = 1, seed: int = 0,
                  adders_per_stage: int = 1):
    """Build the schedule for one method, timing the exploration step.

    Returns (schedule, exploration_seconds).  Exploration time covers graph
    construction and ordering search, not schedule materialization.
    """
    from mstbnn import baselines, graph

    if method == "standard":
        return standard_schedule(layer), 0.0
    t0 = time.perf_counter()
    g = graph.build_distance_graph(layer)
    if method == "mst":
        tree = graph.reroot_min_depth(graph.prim_mst(g))
        dt = time.perf_counter() - t0
        return schedule_from_tree(tree, layer, "mst"), dt
    if method == "kmedoid":
        forest = baselines.kmedoid_cluster(g, r, seed)
        dt = time.perf_counter() - t0
        return schedule_from_forest(forest, layer), dt
    if method == "hampath":
        path = baselines.held_karp_shortest_ham_path(g)
        dt = time.perf_counter() - t0
        tree = baselines.ham_path_as_tree(path, g)
        return schedule_from_tree(tree, layer, "hampath"), dt
    raise ValueError(f"unknown method {method!r}")

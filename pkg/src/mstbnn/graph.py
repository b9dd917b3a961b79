"""Inter-channel distance graph and its minimum spanning tree.

Vertices are output channels; edge weights are Hamming distances between
the channels' weight sets.  Depth counts edges on the longest
root-to-leaf path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mstbnn import kernels
from mstbnn.core import BinaryLayer

NO_PARENT = -1


@dataclass(frozen=True)
class DistanceGraph:
    """Complete graph of pairwise Hamming distances (dist is symmetric int64)."""

    dist: np.ndarray
    full: int

    def __post_init__(self):
        d = np.ascontiguousarray(self.dist, dtype=np.int64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if (np.diag(d) != 0).any() or not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric with zero diagonal")
        if d.min(initial=0) < 0 or d.max(initial=0) > self.full:
            raise ValueError("distances must lie in [0, full]")
        object.__setattr__(self, "dist", d)

    @property
    def n(self) -> int:
        return self.dist.shape[0]


@dataclass(frozen=True)
class SpanningTree:
    """Rooted spanning tree: parent[v] per vertex, NO_PARENT at the root."""

    root: int
    parent: np.ndarray
    edge_weight: np.ndarray

    def __post_init__(self):
        parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        ew = np.ascontiguousarray(self.edge_weight, dtype=np.int64)
        n = parent.size
        if ew.size != n or not (0 <= self.root < n):
            raise ValueError("inconsistent tree arrays")
        if parent[self.root] != NO_PARENT:
            raise ValueError("root must have no parent")
        # every vertex must reach the root (also rules out cycles)
        for v in range(n):
            u, hops = v, 0
            while u != self.root:
                u = int(parent[u])
                hops += 1
                if not (0 <= u < n) or hops > n:
                    raise ValueError(f"vertex {v} does not reach the root")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "edge_weight", ew)

    @property
    def n(self) -> int:
        return self.parent.size

    @property
    def total_distance(self) -> int:
        return int(self.edge_weight.sum())

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for v in range(self.n):
            if v != self.root:
                out[int(self.parent[v])].append(v)
        return out

    def depths(self) -> np.ndarray:
        """Edge-hops from the root, per vertex."""
        depth = np.zeros(self.n, dtype=np.int64)
        stack = [self.root]
        kids = self.children()
        while stack:
            u = stack.pop()
            for v in kids[u]:
                depth[v] = depth[u] + 1
                stack.append(v)
        return depth


def build_distance_graph(layer: BinaryLayer) -> DistanceGraph:
    packed = layer.packed_matrix()
    dist = kernels.xor_popcount_rows(packed, packed)
    return DistanceGraph(dist, layer.shape.full)


def _prim_small(g: DistanceGraph, start: int) -> SpanningTree:
    """Plain-Python Prim for small instances, where per-call numpy overhead
    outweighs vectorization.  Same tie-breaks as the dense path."""
    n = g.n
    dist = g.dist.tolist()
    inf = float("inf")
    key = [inf] * n
    parent = [NO_PARENT] * n
    edge_weight = [0] * n
    in_tree = [False] * n
    key[start] = 0
    for _ in range(n):
        v, best = -1, inf
        for u in range(n):
            if not in_tree[u] and key[u] < best:
                v, best = u, key[u]
        in_tree[v] = True
        if v != start:
            edge_weight[v] = key[v]
        row = dist[v]
        for u in range(n):
            if not in_tree[u] and row[u] < key[u]:
                key[u] = row[u]
                parent[u] = v
    parent[start] = NO_PARENT
    return SpanningTree(start, np.asarray(parent, dtype=np.int64),
                        np.asarray(edge_weight, dtype=np.int64))


def prim_mst(g: DistanceGraph, start: int = 0) -> SpanningTree:
    """Dense O(V^2) Prim.  Frontier ties break toward the smallest child id."""
    n = g.n
    if n == 0:
        raise ValueError("empty graph")
    if not (0 <= start < n):
        raise ValueError(f"start vertex {start} out of range")
    if n <= 64:
        return _prim_small(g, start)
    in_tree = np.zeros(n, dtype=bool)
    key = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    parent = np.full(n, NO_PARENT, dtype=np.int64)
    edge_weight = np.zeros(n, dtype=np.int64)
    key[start] = 0
    for _ in range(n):
        v = int(key.argmin())  # argmin takes the smallest index on ties
        in_tree[v] = True
        if v != start:
            edge_weight[v] = key[v]
        key[v] = np.iinfo(np.int64).max  # never reselected
        # strict < keeps the first (smallest-id) parent on equal weights
        row = g.dist[v]
        better = (row < key) & ~in_tree
        key[better] = row[better]
        parent[better] = v
    parent[start] = NO_PARENT
    return SpanningTree(start, parent, edge_weight)


def tree_depth(t: SpanningTree) -> int:
    return int(t.depths().max())


def _undirected_adjacency(t: SpanningTree) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(t.n)]
    for v in range(t.n):
        if v != t.root:
            u = int(t.parent[v])
            w = int(t.edge_weight[v])
            adj[u].append((v, w))
            adj[v].append((u, w))
    return adj


def _bfs_depths(adj, root: int, n: int) -> np.ndarray:
    depth = np.full(n, -1, dtype=np.int64)
    depth[root] = 0
    queue = [root]
    for u in queue:
        for v, _ in adj[u]:
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                queue.append(v)
    return depth


def reroot(t: SpanningTree, new_root: int) -> SpanningTree:
    """Same undirected edge set, re-rooted at new_root."""
    adj = _undirected_adjacency(t)
    parent = np.full(t.n, NO_PARENT, dtype=np.int64)
    edge_weight = np.zeros(t.n, dtype=np.int64)
    seen = np.zeros(t.n, dtype=bool)
    seen[new_root] = True
    queue = [new_root]
    for u in queue:
        for v, w in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                edge_weight[v] = w
                queue.append(v)
    return SpanningTree(new_root, parent, edge_weight)


def reroot_min_depth(t: SpanningTree) -> SpanningTree:
    """Root giving minimal depth; ties break toward the smallest vertex id.

    The minimum-eccentricity roots of a tree are exactly its center, the
    middle vertex (or two adjacent vertices) of any diameter path, so two
    BFS passes suffice instead of trying every root.
    """
    if t.n == 1:
        return reroot(t, 0)
    adj = _undirected_adjacency(t)
    u = int(_bfs_depths(adj, 0, t.n).argmax())
    far = _bfs_depths(adj, u, t.n)
    w = int(far.argmax())
    # walk the diameter path back from w toward u
    prev = np.full(t.n, -1, dtype=np.int64)
    seen = np.zeros(t.n, dtype=bool)
    seen[u] = True
    queue = [u]
    for a in queue:
        for b, _ in adj[a]:
            if not seen[b]:
                seen[b] = True
                prev[b] = a
                queue.append(b)
    path = [w]
    while path[-1] != u:
        path.append(int(prev[path[-1]]))
    diameter = len(path) - 1
    mid = diameter // 2
    if diameter % 2 == 0:
        best_root = path[mid]
    else:
        best_root = min(path[mid], path[mid + 1])
    return reroot(t, best_root)

"""Prior-work orderings: K-medoid star forests and the shortest Hamiltonian path.

Both are exact at small instance sizes so they can serve as comparison
baselines and as oracles for the spanning-tree cost bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mstbnn.graph import NO_PARENT, DistanceGraph, SpanningTree

HELD_KARP_MAX_VERTICES = 20

KMEDOID_MAX_ITERS = 100


@dataclass(frozen=True)
class StarForest:
    """Centers plus a nearest-center assignment (assign[c] == c for centers)."""

    centers: tuple
    assign: np.ndarray

    def __post_init__(self):
        centers = tuple(sorted(int(c) for c in self.centers))
        if len(centers) == 0 or len(set(centers)) != len(centers):
            raise ValueError("centers must be nonempty and distinct")
        assign = np.ascontiguousarray(self.assign, dtype=np.int64)
        for c in centers:
            if assign[c] != c:
                raise ValueError("centers must be assigned to themselves")
        if not np.isin(assign, centers).all():
            raise ValueError("assignments must point at centers")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "assign", assign)

    @property
    def n(self) -> int:
        return self.assign.size

    @property
    def r(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class HamPath:
    """Open Hamiltonian path: a vertex permutation and its total distance."""

    order: tuple
    total: int


def _nearest_centers(dist: np.ndarray, centers: list[int]) -> np.ndarray:
    # centers sorted ascending, so argmin's first-hit rule breaks ties
    # toward the smallest center id
    centers = sorted(centers)
    idx = np.asarray(centers, dtype=np.int64)
    assign = idx[dist[:, idx].argmin(axis=1)]
    assign[idx] = idx  # a center always stays in its own cluster
    return assign


def _seed_centers(dist: np.ndarray, r: int, rng: np.random.Generator) -> list[int]:
    """k-means++-style seeding on the distance matrix."""
    n = dist.shape[0]
    centers = [int(rng.integers(n))]
    while len(centers) < r:
        d2 = dist[:, centers].min(axis=1).astype(np.float64) ** 2
        d2[centers] = 0.0
        total = d2.sum()
        if total > 0:
            centers.append(int(rng.choice(n, p=d2 / total)))
        else:
            remaining = [v for v in range(n) if v not in centers]
            centers.append(int(rng.choice(remaining)))
    return centers


def kmedoid_cluster(g: DistanceGraph, r: int, seed: int = 0) -> StarForest:
    """Alternate nearest-center assignment and medoid updates to a fixpoint."""
    n = g.n
    if not (1 <= r <= n):
        raise ValueError(f"center count {r} out of range [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = _seed_centers(g.dist, r, rng)
    assign = _nearest_centers(g.dist, centers)
    for _ in range(KMEDOID_MAX_ITERS):
        new_centers = []
        for c in sorted(centers):
            members = np.flatnonzero(assign == c)
            within = g.dist[np.ix_(members, members)].sum(axis=1)
            new_centers.append(int(members[within.argmin()]))
        new_assign = _nearest_centers(g.dist, new_centers)
        if np.array_equal(new_assign, assign) and sorted(new_centers) == sorted(centers):
            break
        centers, assign = new_centers, new_assign
    return StarForest(tuple(sorted(centers)), assign)


def kmedoid_cost(f: StarForest, g: DistanceGraph) -> int:
    """XNORs per pixel: one full kernel per center plus member distances."""
    non_centers = [v for v in range(f.n) if v not in f.centers]
    member = sum(int(g.dist[v, f.assign[v]]) for v in non_centers)
    return f.r * g.full + member


def held_karp_shortest_ham_path(g: DistanceGraph) -> HamPath:
    """Exact shortest open Hamiltonian path over all endpoint pairs.

    Subset DP, O(V^2 2^V); among optimal paths the lexicographically
    smallest vertex order is returned.
    """
    n = g.n
    if n > HELD_KARP_MAX_VERTICES:
        raise ValueError(
            f"instance too large for exact Hamiltonian path (V={n} > {HELD_KARP_MAX_VERTICES})"
        )
    if n == 1:
        return HamPath((0,), 0)
    d = g.dist.astype(np.int64)
    inf = np.iinfo(np.int64).max // 4
    # dp[S, v]: min cost of a path visiting exactly S and ending at v
    dp = np.full((1 << n, n), inf, dtype=np.int64)
    ids = np.arange(n)
    for v in range(n):
        dp[1 << v, v] = 0
    for mask in range(1, 1 << n):
        row = dp[mask]
        members = row < inf
        if not members.any():
            continue
        ext = (row[members, None] + d[members]).min(axis=0)
        out = ~((mask >> ids) & 1).astype(bool)
        tv = ids[out]
        tm = mask | (1 << tv)
        dp[tm, tv] = np.minimum(dp[tm, tv], ext[tv])
    full_mask = (1 << n) - 1
    total = int(dp[full_mask].min())
    # Greedy front-to-back reconstruction; by path reversal symmetry
    # dp[S, v] is also the cost of the best path starting at v over S.
    order = []
    mask = full_mask
    v = int(np.flatnonzero(dp[full_mask] == total)[0])
    need = total
    order.append(v)
    while len(order) < n:
        mask ^= 1 << v
        rest = [u for u in range(n) if (mask >> u) & 1]
        for u in rest:
            if int(d[v, u] + dp[mask, u]) == need:
                need -= int(d[v, u])
                v = u
                break
        else:  # pragma: no cover - DP invariant
            raise AssertionError("path reconstruction failed")
        order.append(v)
    return HamPath(tuple(order), total)


def ham_path_as_tree(p: HamPath, g: DistanceGraph) -> SpanningTree:
    """View the path as a chain tree rooted at its first vertex."""
    n = len(p.order)
    parent = np.full(n, NO_PARENT, dtype=np.int64)
    edge_weight = np.zeros(n, dtype=np.int64)
    for k in range(1, n):
        v, u = p.order[k], p.order[k - 1]
        parent[v] = u
        edge_weight[v] = int(g.dist[u, v])
    return SpanningTree(p.order[0], parent, edge_weight)

import itertools

import numpy as np
import pytest

from mstbnn.baselines import (
    HamPath,
    StarForest,
    ham_path_as_tree,
    held_karp_shortest_ham_path,
    kmedoid_cluster,
    kmedoid_cost,
)
from mstbnn.graph import DistanceGraph, prim_mst, tree_depth

from conftest import random_distance_graph


# --- oracles --------------------------------------------------------------

def ham_path_bruteforce(dist):
    n = dist.shape[0]
    best_total, best_order = None, None
    for perm in itertools.permutations(range(n)):
        total = sum(int(dist[perm[k], perm[k + 1]]) for k in range(n - 1))
        if best_total is None or total < best_total or (
            total == best_total and perm < best_order
        ):
            best_total, best_order = total, perm
    return best_total, best_order


def two_center_cost_bruteforce(g):
    """Exact optimum of the star-forest cost with exactly two centers."""
    n = g.n
    best = None
    for c1, c2 in itertools.combinations(range(n), 2):
        cost = 2 * g.full
        for v in range(n):
            if v not in (c1, c2):
                cost += int(min(g.dist[v, c1], g.dist[v, c2]))
        best = cost if best is None else min(best, cost)
    return best


def star_cost_from_definition(f, g):
    total = f.r * g.full
    for v in range(f.n):
        if v not in f.centers:
            total += int(g.dist[v, int(f.assign[v])])
    return total


# --- K-medoid -------------------------------------------------------------

class TestKMedoid:
    def test_r_equals_n(self, rng):
        g = random_distance_graph(rng, 6)
        f = kmedoid_cluster(g, 6, seed=0)
        assert sorted(f.centers) == list(range(6))
        assert kmedoid_cost(f, g) == 6 * g.full

    def test_r_one_is_exact_medoid(self, rng):
        g = random_distance_graph(rng, 9)
        f = kmedoid_cluster(g, 1, seed=3)
        best = min(range(9), key=lambda c: (int(g.dist[c].sum()), c))
        # 1-medoid converges to a vertex whose member-sum is minimal
        assert int(g.dist[f.centers[0]].sum()) == int(g.dist[best].sum())

    def test_r_out_of_range(self, rng):
        g = random_distance_graph(rng, 4)
        with pytest.raises(ValueError, match="center count"):
            kmedoid_cluster(g, 5, seed=0)

    def test_best_of_restarts_matches_two_center_oracle(self, rng):
        g = random_distance_graph(rng, 7, full=16)
        oracle = two_center_cost_bruteforce(g)
        best = min(
            kmedoid_cost(kmedoid_cluster(g, 2, seed=s), g) for s in range(100)
        )
        assert best == oracle

    def test_deterministic_given_seed(self, rng):
        g = random_distance_graph(rng, 12)
        a = kmedoid_cluster(g, 3, seed=7)
        b = kmedoid_cluster(g, 3, seed=7)
        assert a.centers == b.centers
        assert np.array_equal(a.assign, b.assign)

    def test_assignment_is_nearest_center(self, rng):
        g = random_distance_graph(rng, 10)
        f = kmedoid_cluster(g, 3, seed=1)
        for v in range(10):
            c = int(f.assign[v])
            assert g.dist[v, c] == min(g.dist[v, x] for x in f.centers)


class TestKMedoidCost:
    def test_all_centers(self, rng):
        g = random_distance_graph(rng, 4, full=9)
        f = StarForest(tuple(range(4)), np.arange(4))
        assert kmedoid_cost(f, g) == 36

    def test_identical_pair_single_center(self):
        g = DistanceGraph(np.zeros((2, 2), dtype=np.int64), 9)
        f = StarForest((0,), np.zeros(2, dtype=np.int64))
        assert kmedoid_cost(f, g) == 9

    def test_matches_definition_oracle(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 12))
            g = random_distance_graph(rng, n)
            r = int(rng.integers(1, n + 1))
            f = kmedoid_cluster(g, r, seed=int(rng.integers(1000)))
            assert kmedoid_cost(f, g) == star_cost_from_definition(f, g)


# --- Held-Karp ------------------------------------------------------------

class TestHeldKarp:
    def test_two_vertices(self, rng):
        g = random_distance_graph(rng, 2)
        p = held_karp_shortest_ham_path(g)
        assert p.order == (0, 1)
        assert p.total == int(g.dist[0, 1])

    def test_forced_middle_vertex(self):
        d = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=np.int64)
        p = held_karp_shortest_ham_path(DistanceGraph(d, 9))
        assert p.order == (0, 1, 2) and p.total == 2

    def test_against_permutation_bruteforce(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 9))
            g = random_distance_graph(rng, n, full=20)
            p = held_karp_shortest_ham_path(g)
            total, order = ham_path_bruteforce(g.dist)
            assert p.total == total
            assert p.order == order  # lexicographic tie-break matches oracle

    def test_size_cap(self, rng):
        g = random_distance_graph(rng, 21)
        with pytest.raises(ValueError, match="too large"):
            held_karp_shortest_ham_path(g)

    def test_relabeling_invariance(self, rng):
        g = random_distance_graph(rng, 7)
        perm = rng.permutation(7)
        relabeled = DistanceGraph(g.dist[np.ix_(perm, perm)], g.full)
        assert (
            held_karp_shortest_ham_path(g).total
            == held_karp_shortest_ham_path(relabeled).total
        )


class TestHamPathAsTree:
    def test_single_vertex(self):
        g = DistanceGraph(np.zeros((1, 1), dtype=np.int64), 9)
        t = ham_path_as_tree(HamPath((0,), 0), g)
        assert t.n == 1 and t.total_distance == 0

    def test_depth_is_chain_length(self, rng):
        g = random_distance_graph(rng, 4)
        p = held_karp_shortest_ham_path(g)
        t = ham_path_as_tree(p, g)
        assert tree_depth(t) == 3
        assert t.total_distance == p.total

    def test_root_is_path_start(self, rng):
        g = random_distance_graph(rng, 6)
        p = held_karp_shortest_ham_path(g)
        assert ham_path_as_tree(p, g).root == p.order[0]


class TestCrossMethodBounds:
    def test_mst_not_above_ham_path(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 13))
            g = random_distance_graph(rng, n)
            assert (
                prim_mst(g).total_distance
                <= held_karp_shortest_ham_path(g).total
            )

    def test_mst_plus_full_not_above_kmedoid_cost(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 12))
            g = random_distance_graph(rng, n)
            r = int(rng.integers(1, n + 1))
            f = kmedoid_cluster(g, r, seed=int(rng.integers(1000)))
            assert prim_mst(g).total_distance + g.full <= kmedoid_cost(f, g)

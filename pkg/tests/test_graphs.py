import numpy as np
import pytest

from dynbn.graphs import (
    CycleError,
    Dag,
    auroc,
    is_dag,
    max_changes,
    network_distance,
    network_stats,
    topological_order,
)

from conftest import fig1a, fig1d, random_dag


class TestDag:
    def test_rejects_cycle(self):
        with pytest.raises(CycleError):
            Dag(3, [(0, 1), (1, 2), (2, 0)])

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            Dag(3, [(1, 1)])

    def test_add_remove_reverse(self):
        g = Dag(3, [(0, 1)])
        g2 = g.add(1, 2)
        assert g2.has_edge(1, 2) and not g.has_edge(1, 2)
        assert g2.remove(1, 2) == g
        assert g.reverse(0, 1) == Dag(3, [(1, 0)])
        with pytest.raises(CycleError):
            Dag(3, [(0, 1), (1, 2)]).add(2, 0)

    def test_parents_children(self):
        g = fig1a()
        assert g.parents(2) == (0, 1)
        assert g.children(2) == (3,)
        assert g.edge_count == 4


class TestIsDag:
    def test_empty_graph(self):
        assert is_dag(5, [])

    def test_worked_example_graph(self):
        assert is_dag(5, [(0, 2), (1, 2), (2, 3), (3, 4)])

    def test_two_cycle(self):
        assert not is_dag(2, [(0, 1), (1, 0)])


class TestTopologicalOrder:
    def test_more_volatile_first(self):
        g = fig1a()
        assert topological_order(g, [5, 4, 3, 2, 1]) == (0, 1, 2, 3, 4)
        assert topological_order(g, [4, 5, 3, 2, 1]) == (1, 0, 2, 3, 4)

    def test_empty_graph_sorts_by_volatility(self):
        assert topological_order(Dag(3), [4, 1, 9]) == (2, 0, 1)

    def test_always_valid_order(self, rng):
        for _ in range(200):
            g = random_dag(rng, int(rng.integers(2, 8)))
            order = topological_order(g, rng.uniform(0.5, 2.0, size=g.n))
            pos = {v: k for k, v in enumerate(order)}
            assert all(pos[u] < pos[v] for u, v in g.edges)

    def test_volatility_tie_breaks_by_index(self):
        assert topological_order(Dag(3), [1.0, 1.0, 1.0]) == (0, 1, 2)

    def test_requires_positive_volatility(self):
        with pytest.raises(ValueError):
            topological_order(Dag(2), [1.0, 0.0])


class TestMaxChanges:
    def test_worked_example(self):
        assert max_changes(fig1a()) == (6, 4)

    def test_complete_transitive_dag(self):
        g = Dag(3, [(0, 1), (0, 2), (1, 2)])
        assert max_changes(g) == (0, 3)

    def test_empty(self):
        for n in (2, 5, 9):
            assert max_changes(Dag(n)) == (n * (n - 1) // 2, 0)

    def test_unconnected_pair_always_orientable(self, rng):
        # if both orientations closed a cycle there would be paths both ways
        for _ in range(200):
            g = random_dag(rng, int(rng.integers(2, 9)))
            for i in range(g.n):
                for j in range(i + 1, g.n):
                    if not g.has_edge(i, j) and not g.has_edge(j, i):
                        assert not (g.creates_cycle(i, j) and g.creates_cycle(j, i))


class TestNetworkDistance:
    def test_identical(self):
        assert network_distance(fig1a(), fig1a()) == 0

    def test_worked_example_step(self):
        assert network_distance(fig1a(), fig1d()) == 3

    def test_single_edge(self):
        assert network_distance(Dag(3), Dag(3, [(0, 1)])) == 1

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            network_distance(Dag(3), Dag(4))

    def test_metric_properties(self, rng):
        for _ in range(100):
            g1, g2, g3 = (random_dag(rng, 6) for _ in range(3))
            assert network_distance(g1, g2) == network_distance(g2, g1)
            assert network_distance(g1, g3) <= network_distance(g1, g2) + network_distance(g2, g3)
            assert (network_distance(g1, g2) == 0) == (g1 == g2)


class TestNetworkStats:
    def test_empty(self):
        stats = network_stats(Dag(4))
        assert stats.density == 0.0 and stats.clustering == 0.0 and stats.edge_count == 0

    def test_worked_example_density(self):
        assert network_stats(fig1a()).density == 4 / 20

    def test_triangle_clustering(self):
        assert network_stats(Dag(3, [(0, 1), (0, 2), (1, 2)])).clustering == 1.0

    def test_path_has_open_triples(self):
        # skeleton path 0-1-2: one triple, no triangle
        assert network_stats(Dag(3, [(0, 1), (1, 2)])).clustering == 0.0

    def test_ranges(self, rng):
        for _ in range(100):
            stats = network_stats(random_dag(rng, 7))
            assert 0.0 <= stats.density <= 1.0
            assert 0.0 <= stats.clustering <= 1.0


class TestAuroc:
    def test_perfect_ranking(self):
        truth = Dag(3, [(0, 1), (1, 2)])
        assert auroc(truth.adjacency().astype(float), truth) == 1.0

    def test_all_tied_scores(self):
        truth = Dag(3, [(0, 1)])
        assert auroc(np.full((3, 3), 0.7), truth) == 0.5

    def test_hand_enumerated_case(self):
        # positives score {.9, .2}, negatives {.8, .1, .05, .04}: the .9 wins
        # all 4 cross-comparisons, the .2 wins 3 -> 7/8
        truth = Dag(3, [(0, 1), (2, 0)])
        scores = np.zeros((3, 3))
        scores[0, 1], scores[1, 0], scores[0, 2], scores[2, 0] = 0.9, 0.8, 0.1, 0.2
        scores[1, 2], scores[2, 1] = 0.05, 0.04
        assert auroc(scores, truth) == pytest.approx(7 / 8, abs=1e-15)

    @staticmethod
    def _mann_whitney_oracle(scores, truth):
        off = ~np.eye(truth.n, dtype=bool)
        s = scores[off]
        lab = truth.adjacency().astype(bool)[off]
        pos, neg = s[lab], s[~lab]
        wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
        return wins / (len(pos) * len(neg))

    def test_matches_pairwise_comparison_oracle(self, rng):
        for _ in range(60):
            truth = random_dag(rng, 5)
            if truth.edge_count in (0, 20):
                continue
            scores = np.round(rng.random((5, 5)), 1)  # force some ties
            assert auroc(scores, truth) == pytest.approx(
                self._mann_whitney_oracle(scores, truth), abs=1e-12
            )

    def test_degenerate_truth_flags(self):
        with pytest.warns(UserWarning):
            assert auroc(np.zeros((3, 3)), Dag(3)) == 0.5

    def test_complement_identity(self, rng):
        for _ in range(50):
            truth = random_dag(rng, 5)
            if truth.edge_count in (0, 20):
                continue
            scores = rng.random((5, 5))
            total = auroc(scores, truth) + auroc(1.0 - scores, truth)
            assert total == pytest.approx(1.0, abs=1e-12)

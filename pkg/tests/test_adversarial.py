import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.csgraph import dijkstra as cs_dijkstra

from _helpers import random_set, sample_in_set
from smoothro.adversarial import (build_flow_network, min_cost_flow, reduced_costs, worst_case, worst_case_batch,
                                  worst_case_flow, worst_case_lp)
from smoothro.errors import DimensionError, SolverError
from smoothro.sets import SmoothSet, constraint_rows, smooth_set


def example_set():
    return smooth_set([0, 0], [1, 1], [(0, 1)], [0.5])


def vertex_max(s, coef):
    # brute force over pairs (n = 2) of canonical rows
    A, b = constraint_rows(s)
    best = -np.inf
    for i, j in itertools.combinations(range(A.shape[0]), 2):
        M = A[[i, j]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, b[[i, j]])
        if np.all(A @ v <= b + 1e-9):
            best = max(best, float(coef @ v))
    return best


class TestLPRoute:
    def test_zero_coefficient(self):
        s = example_set()
        wc = worst_case_lp(s, [0.0, 0.0])
        assert wc.value == 0.0 and s.contains(wc.delta)

    @pytest.mark.parametrize("backend", ["simplex", "highs"])
    def test_two_dim_example(self, backend):
        s = example_set()
        wc = worst_case_lp(s, [1.0, -2.0], backend=backend)
        assert wc.value == pytest.approx(1.5, abs=1e-9)
        assert vertex_max(s, np.array([1.0, -2.0])) == pytest.approx(1.5, abs=1e-12)
        assert np.allclose(wc.delta, [-0.5, -1.0], atol=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_nonneg_coefficients_hit_upper_bound(self, seed):
        rng = np.random.default_rng(seed)
        s = random_set(rng, 7, density=0.6)
        coef = rng.uniform(0, 2, 7)
        assert worst_case_lp(s, coef).value == pytest.approx(coef @ s.upper, rel=1e-9, abs=1e-9)

    def test_dimension_check(self):
        with pytest.raises(DimensionError):
            worst_case_lp(example_set(), [1.0, 2.0, 3.0])


class TestFlowNetwork:
    def test_no_edges_gives_star(self):
        s = smooth_set([0, 1, 2], [1, 1, 1])
        net = build_flow_network(s, [1, -1, 2])
        assert np.all((net.tail == net.dummy) | (net.head == net.dummy))
        assert net.n_arcs == 6

    def test_two_dim_example_network(self):
        s = example_set()
        net = build_flow_network(s, [1.0, -2.0])
        assert net.n_arcs == 6
        assert net.imbalance.sum() == pytest.approx(0.0)
        res = min_cost_flow(net)
        assert res.cost + net.constant == pytest.approx(1.5, abs=1e-12)

    def test_arc_costs_nonnegative_on_random_sets(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 9))
            s = random_set(rng, n, density=rng.uniform(0.1, 1.0))
            net = build_flow_network(s, rng.normal(size=n))
            assert np.all(net.cost >= 0.0)

    def test_inconsistent_data_raises(self):
        s = example_set()
        bad = SmoothSet(s.graph, s.dist, np.array([5.0, -5.0]), s.upper)
        with pytest.raises(SolverError):
            build_flow_network(bad, [1.0, 1.0])

    def test_dimacs_text(self, tmp_path):
        net = build_flow_network(example_set(), [1.0, -2.0])
        text = net.to_dimacs()
        lines = text.splitlines()
        assert lines[1] == "p min 3 6"
        assert sum(ln.startswith("a ") for ln in lines) == 6
        net.write_dimacs(tmp_path / "f.dimacs")
        assert (tmp_path / "f.dimacs").read_text() == text


class TestMinCostFlow:
    def test_zero_supply(self):
        net = build_flow_network(example_set(), [0.0, 0.0])
        res = min_cost_flow(net)
        assert res.cost == 0.0 and np.all(res.flow == 0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_single_unit_follows_shortest_path(self, seed):
        rng = np.random.default_rng(seed)
        s = random_set(rng, 6, density=0.5)
        coef = np.zeros(6)
        coef[0] = 1.0
        net = build_flow_network(s, coef)
        # vertex 0 receives one unit sent from the dummy
        W = np.full((net.n_nodes, net.n_nodes), np.inf)
        for u, v, c in zip(net.tail, net.head, net.cost):
            W[u, v] = min(W[u, v], c)
        W[~np.isfinite(W)] = 0.0
        dist = cs_dijkstra(W, directed=True, indices=net.dummy)
        res = min_cost_flow(net)
        assert res.cost == pytest.approx(dist[0], abs=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_reduced_costs_certificate(self, seed):
        rng = np.random.default_rng(100 + seed)
        s = random_set(rng, 8, density=0.4)
        net = build_flow_network(s, rng.normal(size=8))
        res = min_cost_flow(net)
        rc = reduced_costs(net, res.potentials)
        assert np.all(rc >= -1e-9)
        assert np.all(np.abs(rc[res.flow > 1e-12]) <= 1e-9)
        assert res.augmentations <= net.n_nodes


class TestFlowRoute:
    @pytest.mark.parametrize("seed", range(100))
    def test_agrees_with_lp(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 25))
        s = random_set(rng, n, density=rng.uniform(0.1, 1.0), zero_radius_prob=0.1)
        coef = rng.normal(size=n) * (rng.random(n) < 0.8)
        a, b = worst_case_lp(s, coef), worst_case_flow(s, coef)
        assert abs(a.value - b.value) <= 1e-8 * (1 + abs(a.value))
        assert s.contains(a.delta, 1e-7) and s.contains(b.delta, 1e-7)

    def test_unit_vectors_give_projection_bounds(self):
        rng = np.random.default_rng(3)
        s = random_set(rng, 6, density=0.7)
        for j in range(6):
            e = np.eye(6)[j]
            assert worst_case_flow(s, e).value == pytest.approx(s.upper[j], abs=1e-10)
            assert worst_case_flow(s, -e).value == pytest.approx(-s.lower[j], abs=1e-10)

    def test_nonneg_coefficients(self):
        rng = np.random.default_rng(4)
        s = random_set(rng, 9, density=0.5)
        coef = rng.uniform(0, 1, 9)
        assert worst_case_flow(s, coef).value == pytest.approx(coef @ s.upper, rel=1e-10)

    def test_dominates_samples(self):
        rng = np.random.default_rng(5)
        s = random_set(rng, 5, density=0.6)
        coef = rng.normal(size=5)
        pts = sample_in_set(rng, s, 1000)
        assert np.max(pts @ coef) <= worst_case_flow(s, coef).value + 1e-9

    def test_dimacs_export_during_solve(self, tmp_path):
        worst_case_flow(example_set(), [1.0, -2.0], dimacs_path=tmp_path / "x.dimacs")
        assert (tmp_path / "x.dimacs").exists()

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100.0))
    def test_homogeneity(self, seed, lam):
        rng = np.random.default_rng(seed)
        s = random_set(rng, 5, density=0.5)
        coef = rng.normal(size=5)
        v1 = worst_case_flow(s, coef).value
        v2 = worst_case_flow(s, lam * coef).value
        assert v2 == pytest.approx(lam * v1, rel=1e-9, abs=1e-9 * (1 + lam))


class TestDispatch:
    def test_methods_agree(self):
        s = example_set()
        assert worst_case(s, [1, -2], "lp").value == pytest.approx(worst_case(s, [1, -2], "flow").value)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            worst_case(example_set(), [1, 1], "magic")

    def test_batch(self):
        s = example_set()
        vals, deltas = worst_case_batch(s, [[1, -2], [1, 1]])
        assert vals == pytest.approx([1.5, 2.0])
        assert deltas.shape == (2, 2)

import numpy as np
import pytest

from _helpers import random_model, random_set, sample_in_set
from smoothro.errors import SolverError, UnsupportedFeatureError
from smoothro.experiments.spath import ShortestPathInstance, calibrated_set, shortest_path_model
from smoothro.experiments.transship import build_transshipment_aarc, generate_instance, transshipment_set
from smoothro.lp import INFEASIBLE
from smoothro.model import RobustLP
from smoothro.sets import complete_edges, smooth_set
from smoothro.solver import (SolverOptions, choose_method, initial_columns, robust_violation, shortest_path_tree,
                             solve, solve_colgen, solve_cutgen)

ALL = ("compact", "dualize", "colgen", "cutgen")


class TestEquivalence:
    @pytest.mark.parametrize("kind", ["nonneg", "singleton_pos", "mixed"])
    @pytest.mark.parametrize("seed", range(5))
    def test_methods_agree(self, kind, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng, 8, 3, kind=kind)
        s = random_set(rng, 8, density=0.5)
        objs = [solve(model, s, m).objective for m in ALL]
        assert max(objs) - min(objs) <= 1e-6 * (1 + abs(objs[0]))

    @pytest.mark.parametrize("method", ALL)
    def test_solution_robustly_feasible(self, method):
        rng = np.random.default_rng(3)
        model = random_model(rng, 6, 3)
        s = random_set(rng, 6, density=0.6)
        res = solve(model, s, method)
        assert res.ok
        assert np.all(robust_violation(model, s, res.x, res.y) <= 1e-6)
        assert np.all(robust_violation(model, s, res.x, res.y, oracle="lp") <= 1e-6)

    def test_cutgen_solution_holds_on_samples(self):
        rng = np.random.default_rng(4)
        model = random_model(rng, 5, 2)
        s = random_set(rng, 5, density=0.6)
        res = solve_cutgen(model, s)
        for p in sample_in_set(rng, s, 1000):
            assert np.all(model.scenario_violation(p, res.x, res.y) <= 1e-6)


class TestColgen:
    def test_tree_spans_each_component(self):
        s = smooth_set([0] * 5, [1] * 5, [(0, 1), (1, 2), (0, 2), (3, 4)], [1.0, 1.0, 3.0, 1.0])
        tree = shortest_path_tree(s)
        assert tree.size == 3
        cols = initial_columns(s)
        assert cols.size == 2 * 5 + 2 * 3

    @pytest.mark.parametrize("seed", range(5))
    def test_history_and_final_scan(self, seed):
        rng = np.random.default_rng(10 + seed)
        model = random_model(rng, 10, 2)
        s = random_set(rng, 10, density=0.9)
        res = solve_colgen(model, s)
        assert res.ok
        hist = np.array(res.stats["objective history"])
        # fewer dual columns restrict the master, so the objective can only fall as columns arrive
        assert np.all(np.diff(hist) <= 1e-7 * (1 + np.abs(hist[:-1])))
        assert res.stats["vars final"] <= res.stats["vars full"]
        assert np.all(robust_violation(model, s, res.x, res.y) <= 1e-6)

    def test_bounded_set_rows_generated(self):
        rng = np.random.default_rng(20)
        model = random_model(rng, 12, 2)
        s = random_set(rng, 12, density=1.0)
        res = solve_colgen(model, s)
        assert 0.0 < res.stats["generated fraction"] <= 1.0


class TestCutgen:
    def test_nominal_outside_set(self):
        s = smooth_set([0.0, 3.0], [2.0, 2.0], [(0, 1)], [0.5])
        assert not s.contains(s.nominal)
        model = RobustLP(2, [-1.0], [0.0], [np.array([[1.0], [1.0]])], [[0.0]], [4.0], x_upper=[10.0])
        assert solve_cutgen(model, s).objective == pytest.approx(solve(model, s, "dualize").objective, abs=1e-9)

    def test_all_nonneg_needs_one_added_round(self):
        rng = np.random.default_rng(5)
        model = random_model(rng, 6, 3, kind="nonneg")
        s = random_set(rng, 6, density=0.5)
        res = solve_cutgen(model, s)
        # every cut is the upper bound vector, so at most it is added once per row
        assert max(res.stats["pool sizes"]) <= 2
        assert res.stats["rounds"] <= 2

    def test_round_cap(self):
        rng = np.random.default_rng(6)
        model = random_model(rng, 6, 3)
        s = random_set(rng, 6, density=0.8)
        with pytest.raises(SolverError):
            solve_cutgen(model, s, SolverOptions(max_rounds=1))


class TestDispatch:
    def test_shortest_path_picks_compact(self):
        inst = ShortestPathInstance(3, [0, 0, 1], [1, 2, 2], [1.0, 2.5, 1.0], 0, 2,
                                    scenarios=np.array([[1.0, 2.0, 1.0], [1.2, 3.0, 0.9], [0.8, 2.5, 1.1]]),
                                    lam=0.1, lam2=0.1)
        s = calibrated_set(inst.with_training(inst.scenarios))
        model = shortest_path_model(inst)
        assert choose_method(model, s) == "compact"

    def test_dense_transshipment_picks_colgen(self):
        inst = generate_instance(6, 0)
        s = transshipment_set(inst, 0.5)
        assert s.graph.n_edges == len(complete_edges(6)) > 2 * 6
        assert choose_method(build_transshipment_aarc(inst, s), s) == "colgen"

    def test_sparse_mixed_picks_dualize(self):
        inst = generate_instance(5, 0)
        s = transshipment_set(inst, 0.5, edges="none")
        res = solve(build_transshipment_aarc(inst, s), s)
        assert res.stats["chosen"] == "dualize" and res.stats["requested"] == "auto"

    def test_unknown_method(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            solve(random_model(rng, 3, 1), random_set(rng, 3), "simplex")


class TestStatus:
    @pytest.mark.parametrize("method", ALL)
    def test_infeasible(self, method):
        s = smooth_set([1.0], [0.5])
        model = RobustLP(1, [-1.0], [0.0], [np.array([[1.0]])], [[0.0]], [1.0], F=[[-1.0]], H=[[0.0]], h=[-2.0],
                         x_upper=[10.0])
        res = solve(model, s, method)
        assert res.status == INFEASIBLE and not res.ok and res.x is None

    def test_integer_rejected(self):
        rng = np.random.default_rng(1)
        base = random_model(rng, 3, 1)
        d = base.to_dict()
        d["x_integer"] = [True] + [False] * (base.n_x - 1)
        model = RobustLP.from_dict(d)
        with pytest.raises(UnsupportedFeatureError):
            solve(model, random_set(rng, 3))

    def test_stats_json(self):
        rng = np.random.default_rng(2)
        res = solve(random_model(rng, 4, 1), random_set(rng, 4), "cutgen")
        assert '"cuts"' in res.stats_json()

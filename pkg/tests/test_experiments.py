import json

import numpy as np
import pytest
from scipy.optimize import linprog

from _helpers import sample_in_set
from smoothro.calibration import RangeBased, gamma_from_scenarios, membership_fraction
from smoothro.errors import DomainError
from smoothro.experiments import cli, crossval, spath, transship
from smoothro.experiments.setcompare import format_table, set_comparison_report, toeplitz_covariance
from smoothro.sets import build, complete_edges, smooth_set
from smoothro.solver import solve


class TestSetCompare:
    def test_report_structure(self):
        rep = set_comparison_report(samples=2000, seed=1)
        names = {(r["distribution"], r["set"]) for r in rep["rows"]}
        assert ("normal", "U_S^Z") in names and ("general", "U_S^Z") not in names
        for r in rep["rows"]:
            if r["set"] == "U_E":
                assert r["volume_ratio"] == 1.0
        assert "U_RB" in format_table(rep)

    def test_toeplitz(self):
        assert toeplitz_covariance(3, 0.5).tolist() == [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]]

    def test_rejects_large_n(self):
        with pytest.raises(DomainError):
            set_comparison_report(n=9, samples=10)


def deterministic_transshipment(inst):
    """Nominal-demand LP over (order, flow >= 0, tau) solved by scipy."""
    n, nA = inst.n, inst.n_arcs
    B = inst.balance_matrix()
    D0 = inst.base_demand
    cost = np.concatenate([inst.c_order, inst.c_tr, np.ones(n)])
    A, b = [], []
    for i in range(n):
        for w in (inst.c_back[i], -inst.c_hold[i]):
            row = np.zeros(2 * n + nA)
            row[i] = -w
            row[n:n + nA] = -w * B[i]
            row[n + nA + i] = -1.0
            A.append(row)
            b.append(-w * D0[i])
    bounds = [(0, None)] * (n + nA) + [(None, None)] * n
    res = linprog(cost, A_ub=np.array(A), b_ub=np.array(b), bounds=bounds, method="highs")
    return res.fun


class TestTransshipment:
    def test_arcs(self):
        tail, head = transship.transshipment_arcs(3)
        assert tail.size == 6 + 6
        assert transship.transshipment_arcs(1)[0].tolist() == [1, 0]

    def test_instance_is_reproducible(self):
        a, b = transship.generate_instance(4, 7), transship.generate_instance(4, 7)
        assert np.array_equal(a.cov, b.cov) and np.all(a.c_back >= 0)
        assert np.allclose(np.diag(a.correlation), 1.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_zero_size_set_is_deterministic_lp(self, seed):
        inst = transship.generate_instance(3, seed)
        s = smooth_set(np.zeros(3), np.zeros(3))
        res = solve(transship.build_transshipment_aarc(inst, s), s, "dualize")
        assert res.objective == pytest.approx(deterministic_transshipment(inst), rel=1e-7)

    def test_objective_falls_with_p(self):
        inst = transship.generate_instance(3, 0)
        objs = [transship.solve_transshipment(inst, p, "dualize")[0].objective for p in (0.01, 0.1, 0.5)]
        assert objs[0] >= objs[1] >= objs[2]

    def test_rules_hold_on_set_members(self):
        inst = transship.generate_instance(3, 1)
        res, rules, s, _ = transship.solve_transshipment(inst, 0.1, "dualize")
        xi = sample_in_set(np.random.default_rng(0), s, 2000)
        assert np.all(rules.flows(xi) >= -1e-7)
        costs = transship.scenario_costs(rules, inst, xi)
        assert costs.max() <= res.objective + 1e-6 * (1 + abs(res.objective))

    def test_cost_bound_is_attained_at_a_worst_case(self):
        inst = transship.generate_instance(2, 3)
        res, rules, s, model = transship.solve_transshipment(inst, 0.5, "dualize")
        from smoothro.adversarial import worst_case_flow
        wc = worst_case_flow(s, model.coefficient(0, res.x))
        assert float(transship.scenario_costs(rules, inst, wc.delta)[0]) <= res.objective + 1e-6

    def test_sampled_deviations_nonnegative(self):
        inst = transship.generate_instance(3, 2)
        dev = transship.sample_deviations(inst, 500, 0)
        assert np.all(dev >= 0.0)
        mean, worst = transship.evaluate_transshipment(transship.solve_transshipment(inst, 0.5)[1], inst, 500)
        assert worst >= mean

    def test_report_is_reproducible(self):
        a = transship.transshipment_report(2, [0.5], scenarios=200)
        b = transship.transshipment_report(2, [0.5], scenarios=200)
        assert json.dumps(a, sort_keys=True, default=float) == json.dumps(b, sort_keys=True, default=float)


@pytest.fixture(scope="module")
def max_costs_by_p():
    """Max simulated cost over 1e4 scenarios for 20 paired instances at p = 0.01 and p = 0.5."""
    out = {0.01: [], 0.5: []}
    for k in range(20):
        inst = transship.generate_instance(5, k)
        for p in out:
            rules = transship.solve_transshipment(inst, p)[1]
            out[p].append(transship.evaluate_transshipment(rules, inst, 10_000, k)[1])
    return {p: np.array(v) for p, v in out.items()}


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="paired max costs fall with the larger set on only 5 of 20 instances")
def test_larger_set_max_cost_sign_test(max_costs_by_p):
    # one-sided sign test at 90%: P(X >= 14 | n = 20, 1/2) = 0.058
    assert int(np.sum(max_costs_by_p[0.01] <= max_costs_by_p[0.5])) >= 14


@pytest.mark.slow
def test_larger_set_lowers_mean_of_max_costs(max_costs_by_p):
    assert max_costs_by_p[0.01].mean() < max_costs_by_p[0.5].mean()


def toy(nominal=(1.0, 1.1)):
    return spath.ShortestPathInstance(2, [0, 0], [1, 1], nominal, 0, 1)


def random_graph(rng, nodes=8):
    """Random digraph with a guaranteed 0 -> nodes-1 chain and positive scenario times."""
    pairs = {(i, i + 1) for i in range(nodes - 1)}
    for _ in range(2 * nodes):
        u, v = rng.integers(nodes, size=2)
        if u != v:
            pairs.add((int(u), int(v)))
    arr = np.array(sorted(pairs))
    nominal = rng.uniform(1.0, 5.0, len(arr))
    D = nominal * rng.uniform(0.7, 1.5, (30, len(arr)))
    return spath.ShortestPathInstance(nodes, arr[:, 0], arr[:, 1], nominal, 0, nodes - 1, scenarios=D,
                                      lam=float(rng.uniform(0, 0.5)), lam2=float(rng.uniform(0, 0.5))
                                      ).with_training(D)


class TestShortestPath:
    def test_toy_projection_and_choice(self):
        s = smooth_set([1.0, 1.0], [0.3, 0.05], [(0, 1)], [0.1])
        assert np.allclose(s.upper, [1.15, 1.05])
        w = spath.robust_weights(toy(), s)
        assert np.allclose(w, [1.15, 1.155])
        path, cost = spath.robust_shortest_path(toy(), s)
        assert path.tolist() == [0] and cost == pytest.approx(1.15)

    def test_toy_with_nominal_at_f_hat(self):
        s = smooth_set([1.0, 1.1], [0.3, 0.05], [(0, 1)], [0.1])
        assert np.allclose(s.upper, [1.25, 1.15])
        assert np.allclose(s.upper * np.array([1.0, 1.1]), [1.25, 1.265])

    def test_dijkstra_against_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            inst = random_graph(rng, 6)
            w = rng.uniform(0, 3, inst.n_arcs)
            path, length = spath.dijkstra(inst.n_nodes, inst.tail, inst.head, w, 0, 5)
            # Bellman-Ford oracle
            d = np.full(6, np.inf)
            d[0] = 0.0
            for _ in range(6):
                d = np.minimum(d, np.array([min([d[t] + w[a] for a, (t, h) in enumerate(zip(inst.tail, inst.head))
                                                 if h == v] + [d[v]]) for v in range(6)]))
            assert length == pytest.approx(d[5], abs=1e-12)
            assert w[path].sum() == pytest.approx(length)
            assert inst.tail[path[0]] == 0 and inst.head[path[-1]] == 5

    def test_dijkstra_errors(self):
        with pytest.raises(DomainError):
            spath.dijkstra(3, [0], [1], [1.0], 0, 2)
        with pytest.raises(DomainError):
            spath.dijkstra(2, [0], [1], [-1.0], 0, 1)

    def test_zero_lambda_gives_nominal_path(self):
        inst = spath.synthetic_layered_instance(stages=3, width=3, scenarios=50, seed=2)
        p0, c0 = spath.nominal_path(inst)
        p, c = spath.robust_shortest_path(inst)
        assert p.tolist() == p0.tolist() and c == pytest.approx(c0)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_robust_lp(self, seed):
        inst = random_graph(np.random.default_rng(seed))
        s = spath.calibrated_set(inst)
        _, cost = spath.robust_shortest_path(inst, s)
        model = spath.shortest_path_model(inst)
        for method in ("compact", "dualize"):
            res = solve(model, s, method)
            assert res.objective == pytest.approx(cost, rel=1e-7)

    def test_box_only_has_no_edges(self):
        inst = random_graph(np.random.default_rng(1))
        from dataclasses import replace
        s = spath.calibrated_set(replace(inst, edges=np.zeros((0, 2), dtype=int)))
        assert s.graph.n_edges == 0

    def test_incidence_and_path_vector(self):
        inst = random_graph(np.random.default_rng(2))
        path, _ = spath.nominal_path(inst)
        v = spath.path_vector(inst, path)
        flow = spath.incidence(inst) @ v
        expect = np.zeros(inst.n_nodes)
        expect[inst.origin], expect[inst.target] = 1.0, -1.0
        assert np.allclose(flow, expect)

    def test_instance_round_trip(self, tmp_path):
        inst = toy()
        (tmp_path / "g.json").write_text(json.dumps(inst.to_dict()))
        back = spath.ShortestPathInstance.load(tmp_path / "g.json")
        assert back.nominal.tolist() == inst.nominal.tolist()
        with pytest.raises(DomainError):
            spath.ShortestPathInstance(2, [0], [1], [0.0], 0, 1)

    def test_nondominated_and_hypervolume(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0, 1, (30, 2))
        keep = pts[spath.nondominated(pts)]
        for p in keep:
            assert not np.any(np.all(pts <= p, axis=1) & np.any(pts < p, axis=1))
        # grid oracle for the dominated area
        g = (np.arange(1000) + 0.5) / 1000 * 1.1
        X, Y = np.meshgrid(g, g)
        dom = np.zeros_like(X, dtype=bool)
        for x, y in pts:
            dom |= (X >= x) & (Y >= y)
        assert spath.hypervolume(pts, (1.1, 1.1)) == pytest.approx(dom.mean() * 1.1 ** 2, abs=5e-3)

    def test_study_deterministic_and_shaped(self):
        inst = spath.synthetic_layered_instance(stages=3, width=2, scenarios=40, seed=0)
        settings = spath.default_settings((0.1, 0.3), (0.1,), (1.0, 3.0))
        a = spath.shortest_path_study(inst, splits=2, settings=settings)
        b = spath.shortest_path_study(inst, splits=2, settings=settings)
        assert a == b
        assert set(a["hypervolume"]) == {"smooth_max", "box_max", "box_stdev"}
        assert len(a["rows"]) == len(settings)

    def test_split_indices(self):
        for tr, te in spath.split_indices(20, 3, 0.8, 0):
            assert tr.size == 16 and np.intersect1d(tr, te).size == 0


class TestCrossval:
    def test_folds_partition(self):
        splits = crossval.fold_indices(20, 7, 0)
        va = np.concatenate([v for _, v in splits])
        assert np.array_equal(np.sort(va), np.arange(20))
        with pytest.raises(DomainError):
            crossval.fold_indices(3, 7)

    def test_range_set_holds_its_training_data(self):
        D = crossval.low_rank_scenarios(20, 6, seed=1)
        s = build(gamma_from_scenarios(D, RangeBased(1.0, 1.0), complete_edges(6)))
        assert membership_fraction(s, D) == 1.0

    def test_standardize(self):
        D = crossval.standardize(np.random.default_rng(0).normal(3, 2, (50, 4)))
        assert np.allclose(D.mean(axis=0), 0) and np.allclose(D.std(axis=0), 1)

    def test_size_at_level(self):
        assert crossval.size_at_level([1, 2, 3], [0.5, 0.96, 0.99]) == 2.0
        assert crossval.size_at_level([1, 2], [0.1, 0.2]) == np.inf

    def test_study_deterministic(self):
        D = crossval.low_rank_scenarios(14, 5, seed=0)
        kw = dict(folds=7, alpha_grid=(0.5, 1.0, 5.0), beta_grid=(0.5, 5.0), rho_grid=(0.5,), omega_grid=(1.0, 100.0))
        a = crossval.crossval_membership_study(D, **kw)
        b = crossval.crossval_membership_study(D, **kw)
        assert a == b
        probs = [r["prob"] for r in a["smooth"]]
        assert all(0.0 <= p <= 1.0 for p in probs)
        assert isinstance(crossval.smooth_smaller_at_level(a), bool)


class TestCLI:
    def run(self, capsys, *argv):
        code = cli.main(list(argv))
        return code, capsys.readouterr()

    def test_set_compare(self, capsys, tmp_path):
        code, _ = self.run(capsys, "set-compare", "--samples", "500", "--out", str(tmp_path / "r.json"),
                           "--csv", str(tmp_path / "r.csv"))
        assert code == 0
        rep = json.loads((tmp_path / "r.json").read_text())
        assert rep["n"] == 5 and (tmp_path / "r.csv").read_text().count("\n") == len(rep["rows"]) + 1

    def test_transship_stdout(self, capsys):
        code, out = self.run(capsys, "transship", "--n", "2", "--p", "0.5", "--scenarios", "100")
        assert code == 0 and json.loads(out.out)["rows"][0]["status"] == "optimal"

    def test_spath_pipeline(self, capsys, tmp_path):
        g, d = str(tmp_path / "g.json"), str(tmp_path / "d.csv")
        assert self.run(capsys, "synth", "spath", "--scenarios", d, "--graph", g, "--rows", "40")[0] == 0
        code, out = self.run(capsys, "spath", "--graph", g, "--scenarios", d, "--splits", "2")
        rep = json.loads(out.out)
        assert code == 0 and rep["study"]["rows"] and rep["robust_cost"] >= rep["nominal_cost"] - 1e-12

    def test_crossval_pipeline(self, capsys, tmp_path):
        d = str(tmp_path / "d.csv")
        assert self.run(capsys, "synth", "crossval", "--scenarios", d, "--rows", "14")[0] == 0
        code, out = self.run(capsys, "crossval", "--scenarios", d, "--alpha-grid", "1,5", "--beta-grid", "1",
                             "--rho-grid", "0.5", "--omega-grid", "10")
        assert code == 0 and "size_at_level" in json.loads(out.out)

    def test_bad_input_exits_2(self, capsys, tmp_path):
        code, out = self.run(capsys, "crossval", "--scenarios", str(tmp_path / "missing.csv"))
        assert code == 2 and out.err

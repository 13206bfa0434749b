import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from smoothro.errors import DimensionError, DomainError
from smoothro.lp import (
    EQ,
    GE,
    INFEASIBLE,
    LE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    LPBuilder,
    LPOptions,
    read_lp_json,
    read_mps,
    solve_lp,
    write_lp_json,
    write_mps,
)

BACKENDS = ["simplex", "highs"]


def kkt_report(p, sol):
    """Primal/dual residuals of an optimal solution under the documented sign convention."""
    z, y = sol.x, sol.duals
    r = p.c - p.A.T @ y
    primal = p.max_violation(z)
    le, ge = p.sense == LE, p.sense == GE
    dual_sign = max(np.max(y[le], initial=0.0), -np.min(y[ge], initial=0.0))
    # reduced costs: >= 0 allowed only at a finite lower bound, <= 0 only at a finite upper bound
    at_lo = np.isfinite(p.lower) & (z <= p.lower + 1e-7)
    at_hi = np.isfinite(p.upper) & (z >= p.upper - 1e-7)
    bad = np.where(r > 0, np.where(at_lo, 0.0, r), np.where(at_hi, 0.0, -r))
    slack = p.row_activity(z) - p.rhs
    comp = np.max(np.abs(y * slack), initial=0.0)
    dual_obj = p.rhs @ y + np.sum(np.where(r > 0, np.where(np.isfinite(p.lower), p.lower, 0) * r,
                                           np.where(np.isfinite(p.upper), p.upper, 0) * r))
    return primal, dual_sign, float(np.max(bad, initial=0.0)), comp, abs(dual_obj - sol.objective)


def assert_kkt(p, sol, tol=1e-7):
    primal, dsign, dfeas, comp, gap = kkt_report(p, sol)
    scale = 1 + abs(sol.objective)
    assert primal <= tol * scale
    assert dsign <= tol
    assert dfeas <= 1e-6 * scale
    assert comp <= 1e-6 * scale
    assert gap <= 1e-6 * scale


def known_optimum_instance(rng, m, n, degenerate=False):
    """Random <= program with a planted KKT point, so the optimum is known."""
    A = rng.normal(size=(m, n))
    x = np.where(rng.random(n) < 0.5, rng.uniform(0.1, 2, n), 0.0)
    active = rng.random(m) < 0.5
    y = np.where(active, -rng.uniform(0.1, 1, m), 0.0)
    if degenerate:
        # extra active rows with zero multipliers
        active |= rng.random(m) < 0.5
    slack = np.where(active, 0.0, rng.uniform(0.1, 1, m))
    b = A @ x + slack
    r = np.where(x > 0, 0.0, rng.uniform(0.0, 1.0, n))
    c = A.T @ y + r
    return LinearProgram(c, A, [LE] * m, b), float(c @ x)


class TestExamples:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_lower_bound_row(self, backend):
        sol = solve_lp(LinearProgram.from_rows([1.0], [([1.0], GE, 3.0)]), backend=backend)
        assert sol.status == OPTIMAL
        assert sol.x[0] == pytest.approx(3.0) and sol.objective == pytest.approx(3.0)
        assert sol.duals[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_hand_dual(self, backend):
        sol = solve_lp(LinearProgram.from_rows([-1.0, -1.0], [([1.0, 1.0], LE, 1.0)]), backend=backend)
        assert sol.objective == pytest.approx(-1.0)
        assert sol.duals[0] == pytest.approx(-1.0)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_infeasible(self, backend):
        sol = solve_lp(LinearProgram.from_rows([1.0], [([1.0], LE, -1.0)]), backend=backend)
        assert sol.status == INFEASIBLE

    def test_unbounded(self):
        sol = solve_lp(LinearProgram.from_rows([-1.0, 0.0], [([1.0, -1.0], LE, 1.0)]), backend="simplex")
        assert sol.status == UNBOUNDED

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_bounds_and_free(self, backend):
        # min x0 - x1 + 2 x2, x0 free, x1 in [-inf, 4], x2 in [-1, 3]; x0 + x1 + x2 = 2, x0 >= -5
        p = LinearProgram.from_rows([1.0, -1.0, 2.0], [([1, 1, 1], EQ, 2.0), ([1, 0, 0], GE, -5.0)],
                                    lower=[-np.inf, -np.inf, -1], upper=[np.inf, 4, 3])
        sol = solve_lp(p, backend=backend)
        assert sol.status == OPTIMAL
        # objective = x0 - x1 + 2 x2 with x0 = 2 - x1 - x2 -> 2 - 2 x1 + x2; best at x1=4, x2=-1, x0=-1
        assert sol.objective == pytest.approx(-7.0)
        np.testing.assert_allclose(sol.x, [-1, 4, -1], atol=1e-9)
        assert_kkt(p, sol)

    def test_beale_cycling_example(self):
        c = [-0.75, 20, -0.5, 6]
        rows = [([0.25, -8, -1, 9], LE, 0.0), ([0.5, -12, -0.5, 3], LE, 0.0), ([0, 0, 1, 0], LE, 1.0)]
        sol = solve_lp(LinearProgram.from_rows(c, rows), backend="simplex")
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(-1.25)

    def test_malformed(self):
        with pytest.raises(DimensionError):
            LinearProgram(np.ones(2), np.ones((1, 3)), [LE], [1.0])
        with pytest.raises(DomainError):
            LinearProgram(np.ones(1), np.ones((1, 1)), ["<>"], [1.0])
        with pytest.raises(DomainError):
            LinearProgram(np.ones(1), np.ones((1, 1)), [LE], [np.nan])

    def test_iteration_limit(self):
        p, _ = known_optimum_instance(np.random.default_rng(0), 30, 40)
        assert solve_lp(p, LPOptions(max_iter=1), backend="simplex").status == "iteration_limit"

    def test_auto_dispatch(self):
        p, _ = known_optimum_instance(np.random.default_rng(1), 5, 5)
        assert solve_lp(p).backend == "simplex"
        assert solve_lp(p, LPOptions(auto_max_rows=2)).backend == "highs"

    def test_redundant_equalities(self):
        p = LinearProgram.from_rows([1.0, 2.0], [([1, 1], EQ, 1.0), ([2, 2], EQ, 2.0)])
        sol = solve_lp(p, backend="simplex")
        assert sol.status == OPTIMAL and sol.objective == pytest.approx(1.0)
        assert_kkt(p, sol)


class TestRandom:
    @pytest.mark.parametrize("seed", range(12))
    def test_planted_optimum(self, seed):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(2, 60)), int(rng.integers(2, 100))
        p, opt = known_optimum_instance(rng, m, n, degenerate=seed % 2 == 1)
        sol = solve_lp(p, backend="simplex")
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(opt, rel=1e-7, abs=1e-7)
        assert_kkt(p, sol)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_highs_with_mixed_rows(self, seed):
        rng = np.random.default_rng(100 + seed)
        m, n = int(rng.integers(2, 25)), int(rng.integers(2, 30))
        A = rng.normal(size=(m, n))
        x0 = rng.uniform(-1, 1, n)
        sense = rng.choice([LE, GE, EQ], size=m, p=[0.5, 0.3, 0.2])
        act = A @ x0
        rhs = np.where(sense == LE, act + rng.uniform(0, 1, m), np.where(sense == GE, act - rng.uniform(0, 1, m), act))
        lower = np.where(rng.random(n) < 0.3, -np.inf, -2.0)
        upper = np.where(rng.random(n) < 0.3, np.inf, 2.0)
        p = LinearProgram(rng.normal(size=n), A, sense, rhs, lower, upper)
        a, b = solve_lp(p, backend="simplex"), solve_lp(p, backend="highs")
        assert a.status == b.status
        if a.status == OPTIMAL:
            assert a.objective == pytest.approx(b.objective, rel=1e-7, abs=1e-7)
            assert_kkt(p, a)

    def test_duals_match_finite_differences(self):
        rng = np.random.default_rng(7)
        p, _ = known_optimum_instance(rng, 8, 12)
        # mixed relations: turn half the rows into >= by negation, one into equality
        A = p.A.toarray()
        flip = np.arange(8) % 2 == 1
        A[flip] *= -1
        rhs = np.where(flip, -p.rhs, p.rhs)
        sense = np.where(flip, GE, LE)
        q = LinearProgram(p.c, A, sense, rhs, upper=10.0)
        sol = solve_lp(q, backend="simplex")
        eps = 1e-6
        for i in range(8):
            r2 = rhs.copy()
            r2[i] += eps
            s2 = solve_lp(LinearProgram(q.c, A, sense, r2, upper=10.0), backend="simplex")
            assert (s2.objective - sol.objective) / eps == pytest.approx(sol.duals[i], abs=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 10**6), st.booleans())
def test_strong_duality_property(m, n, seed, degenerate):
    p, opt = known_optimum_instance(np.random.default_rng(seed), m, n, degenerate)
    sol = solve_lp(p, backend="simplex")
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(opt, rel=1e-7, abs=1e-7)
    # no bounds here, so the dual objective is rhs^T y
    assert abs(p.rhs @ sol.duals - sol.objective) <= 1e-7 * (1 + abs(opt))
    assert_kkt(p, sol)


def test_degenerate_battery():
    rng = np.random.default_rng(11)
    for _ in range(30):
        # many rows through the origin vertex
        m, n = int(rng.integers(3, 15)), int(rng.integers(2, 8))
        A = rng.integers(-2, 3, size=(m, n)).astype(float)
        p = LinearProgram(rng.integers(-3, 3, size=n).astype(float), A, [LE] * m, np.zeros(m), upper=1.0)
        a, b = solve_lp(p, backend="simplex"), solve_lp(p, backend="highs")
        assert a.status == b.status == OPTIMAL
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


class TestInterchange:
    def _program(self):
        return LinearProgram(np.array([1.0, -2.0, 0.5]), sparse.csr_matrix([[1.0, 1.0, 0.0], [0.0, 1.5, -1.0]]),
                             [LE, GE], [4.0, -1.0], lower=[0.0, -np.inf, -1.0], upper=[np.inf, 3.0, -1.0])

    def test_mps_round_trip(self, tmp_path):
        p = self._program()
        write_mps(p, tmp_path / "p.mps")
        q = read_mps(tmp_path / "p.mps")
        np.testing.assert_array_equal(q.c, p.c)
        np.testing.assert_array_equal(q.A.toarray(), p.A.toarray())
        np.testing.assert_array_equal(q.lower, p.lower)
        np.testing.assert_array_equal(q.upper, p.upper)
        assert list(q.sense) == list(p.sense)
        assert solve_lp(q).objective == pytest.approx(solve_lp(p).objective)

    def test_mps_fixed_columns(self, tmp_path):
        write_mps(self._program(), tmp_path / "p.mps")
        lines = (tmp_path / "p.mps").read_text().splitlines()
        col = lines[lines.index("COLUMNS") + 1]
        assert col[4:6] == "C0" and col[14:17] == "OBJ"

    def test_json_round_trip(self, tmp_path):
        p = self._program()
        write_lp_json(p, tmp_path / "p.json")
        q = read_lp_json(tmp_path / "p.json")
        np.testing.assert_array_equal(q.A.toarray(), p.A.toarray())
        np.testing.assert_array_equal(q.upper, p.upper)


def test_builder():
    b = LPBuilder()
    x = b.add_vars(2, cost=[1.0, 1.0])
    y = b.add_vars(1, cost=-1.0, lower=-np.inf, upper=5.0)
    b.add_row(np.r_[x, y], [1.0, 1.0, 1.0], GE, 2.0)
    b.add_rows([0, 0, 1], [x[0], y[0], x[1]], [1.0, 1.0, 1.0], [LE, GE], [3.0, 0.5])
    p = b.build()
    assert p.A.shape == (3, 3)
    sol = solve_lp(p)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(solve_lp(p, backend="highs").objective)

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lp_brute_force
from fgwpred.errors import DimMismatchError, NonFiniteCostError
from fgwpred.ot import (
    TransportPlan,
    dual_potentials,
    feature_cost_matrix,
    monotone_coupling,
    product_coupling,
    round_to_polytope,
    solve_exact,
    solve_sinkhorn,
)


class TestFeatureCost:
    def test_examples(self):
        np.testing.assert_array_equal(feature_cost_matrix([[0.0]], [[0.0]]), [[0.0]])
        np.testing.assert_array_equal(feature_cost_matrix([[0.0]], [[3.0]]), [[9.0]])

    def test_expansion_identity(self, rng):
        F1, F2 = rng.random((4, 3)), rng.random((5, 3))
        expected = (F1 ** 2).sum(1)[:, None] + (F2 ** 2).sum(1)[None] - 2 * F1 @ F2.T
        M = feature_cost_matrix(F1, F2)
        np.testing.assert_allclose(M, expected, atol=1e-14)
        np.testing.assert_allclose(feature_cost_matrix(F2, F1), M.T, atol=1e-14)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            feature_cost_matrix(np.zeros((2, 2)), np.zeros((2, 3)))


class TestSolveExact:
    def test_single(self):
        plan, value = solve_exact([[3.7]])
        np.testing.assert_array_equal(plan.pi, [[1.0]])
        assert value == 3.7

    def test_zero_matching(self):
        plan, value = solve_exact([[0, 1], [1, 0]])
        np.testing.assert_array_equal(plan.pi, np.eye(2) / 2)
        assert value == 0.0

    @pytest.mark.parametrize("seed", range(10))
    def test_integer_3x2_vs_brute_force(self, seed):
        cost = np.random.default_rng(seed).integers(0, 10, (3, 2)).astype(float)
        assert abs(solve_exact(cost)[1] - lp_brute_force(cost)) <= 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_vertex_and_optimal(self, n1, n2, seed):
        cost = np.random.default_rng(seed).normal(size=(n1, n2))
        plan, value = solve_exact(cost)
        assert plan.is_feasible()
        assert np.count_nonzero(plan.pi) <= n1 + n2 - 1
        assert abs(value - float((cost * plan.pi).sum())) <= 1e-12
        assert abs(value - lp_brute_force(cost)) <= 1e-9

    def test_beats_random_feasible_plans(self, rng):
        cost = rng.random((6, 9))
        value = solve_exact(cost)[1]
        for _ in range(1000):
            pi = solve_sinkhorn(rng.random((6, 9)), 0.5, warn=False)[0].pi
            assert value <= float((cost * pi).sum()) + 1e-12

    @pytest.mark.parametrize("seed", range(20))
    def test_strong_duality(self, seed):
        r = np.random.default_rng(seed)
        n1, n2 = r.integers(1, 5, 2)
        cost = r.random((n1, n2))
        u, v = dual_potentials(cost)
        # dual feasibility and equal objectives
        assert np.all(cost - u[:, None] - v[None, :] >= -1e-12)
        dual = u.mean() + v.mean()
        assert abs(dual - solve_exact(cost)[1]) <= 1e-9

    def test_permutation_equivariance(self, rng):
        cost = rng.random((5, 7))
        perm = rng.permutation(5)
        pi = solve_exact(cost)[0].pi
        pi_p = solve_exact(cost[perm])[0].pi
        np.testing.assert_allclose(pi_p, pi[perm], atol=1e-15)

    def test_deterministic(self, rng):
        cost = rng.integers(0, 3, (6, 6)).astype(float)  # many ties
        a = solve_exact(cost)[0].pi
        b = solve_exact(cost.copy())[0].pi
        np.testing.assert_array_equal(a, b)

    def test_non_finite(self):
        with pytest.raises(NonFiniteCostError):
            solve_exact([[0.0, np.inf], [1.0, 0.0]])
        with pytest.raises(NonFiniteCostError):
            solve_exact([[np.nan]])

    def test_large_rectangular(self, rng):
        cost = rng.random((40, 45))
        plan, _ = solve_exact(cost)
        assert plan.marginal_violation() <= 1e-10
        assert np.count_nonzero(plan.pi) <= 84


class TestSinkhorn:
    def test_zero_cost(self):
        plan, value, ok = solve_sinkhorn(np.zeros((2, 2)), 0.3)
        np.testing.assert_allclose(plan.pi, 0.25, atol=1e-12)
        assert ok

    def test_small_epsilon(self):
        _, value, _ = solve_sinkhorn([[0.0, 1.0], [1.0, 0.0]], 1e-3)
        assert abs(value - solve_exact([[0.0, 1.0], [1.0, 0.0]])[1]) <= 1e-3

    @pytest.mark.parametrize("eps", [1e-4, 1.0, 100.0])
    def test_single(self, eps):
        plan, value, _ = solve_sinkhorn([[2.0]], eps)
        np.testing.assert_array_equal(plan.pi, [[1.0]])

    @pytest.mark.parametrize("eps", [1e-3, 0.05, 1.0])
    def test_marginals_after_rounding(self, rng, eps):
        plan, _, _ = solve_sinkhorn(rng.random((7, 4)), eps)
        assert plan.marginal_violation() <= 1e-6

    def test_non_convergence_flagged(self, rng):
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            plan, _, ok = solve_sinkhorn(rng.random((6, 6)), 1e-3, max_iter=1)
        assert not ok and rec
        assert plan.marginal_violation() <= 1e-6

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            solve_sinkhorn(np.zeros((2, 2)), 0.0)


class TestPlans:
    def test_couplings_feasible(self):
        for n1, n2 in [(1, 1), (3, 5), (5, 3), (40, 43)]:
            assert TransportPlan(product_coupling(n1, n2)).is_feasible()
            assert TransportPlan(monotone_coupling(n1, n2)).is_feasible()

    def test_monotone_square_is_identity(self):
        np.testing.assert_array_equal(monotone_coupling(4, 4), np.eye(4) / 4)

    def test_rounding(self, rng):
        pi = rng.random((5, 3))
        out = round_to_polytope(pi / pi.sum())
        assert TransportPlan(out).marginal_violation() <= 1e-15 * 10
        assert out.min() >= 0

    def test_tiny_negatives_clamped(self):
        plan = TransportPlan(np.array([[0.5, -1e-17], [0.0, 0.5]]))
        assert plan.pi.min() == 0.0

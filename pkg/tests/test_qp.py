from __future__ import annotations

import numpy as np
import pytest

from aerotrack.qp import QpProblem, QpSolution, kkt_residual, solve

from helpers import dual_projected_gradient_qp_batch


def make_random_problem(rng, n=10, m=8):
    M = rng.normal(size=(n, n))
    H = M.T @ M + np.eye(n)
    g = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    c = A @ x0
    l = c - np.abs(rng.normal(size=m)) - 0.1
    u = c + np.abs(rng.normal(size=m)) + 0.1
    # a few one-sided rows
    drop_lo = rng.uniform(size=m) < 0.25
    drop_hi = rng.uniform(size=m) < 0.25
    l[drop_lo] = -np.inf
    u[drop_hi] = np.inf
    return QpProblem(H, g, A, l, u)


def objective(prob, x):
    return 0.5 * x @ prob.H @ x + prob.g @ x


class TestBasics:
    def test_active_bound(self):
        prob = QpProblem([[2.0]], [0.0], [[1.0]], [1.0], [np.inf])
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(1.0, abs=1e-10)

    def test_unconstrained_stationary_point(self):
        prob = QpProblem([[2.0]], [-4.0], np.zeros((0, 1)), [], [])
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(2.0, abs=1e-12)

    def test_two_sided_row(self):
        # min (x-5)^2 s.t. 0 <= x <= 2 -> x = 2, upper bound active
        prob = QpProblem([[2.0]], [-10.0], [[1.0]], [0.0], [2.0])
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(2.0, abs=1e-10)
        assert sol.multipliers[0] < 0  # upper side

    def test_infeasible_detected(self):
        prob = QpProblem(np.eye(1) * 2, [0.0], [[1.0], [1.0]], [1.0, -np.inf], [np.inf, 0.0])
        sol = solve(prob)
        assert sol.status == "infeasible"
        assert sol.kkt_residual > 0.1  # separating violation magnitude

    def test_psd_regularization(self):
        # singular H: least-norm-ish minimizer still returned, optimal status
        prob = QpProblem(np.zeros((2, 2)), [1.0, 0.0], [[1.0, 0.0]], [0.0], [np.inf])
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(0.0, abs=1e-6)

    def test_invariants_validated(self):
        with pytest.raises(ValueError):
            QpProblem([[1.0, 0.5], [0.4, 1.0]], [0.0, 0.0], np.zeros((0, 2)), [], [])
        with pytest.raises(ValueError):
            QpProblem([[1.0]], [0.0], [[1.0]], [2.0], [1.0])


class TestKktResidual:
    def test_exact_optimum_is_zero(self):
        prob = QpProblem([[2.0]], [0.0], [[1.0]], [1.0], [np.inf])
        assert kkt_residual(prob, np.array([1.0]), np.array([2.0])) < 1e-12

    def test_perturbed_optimum_scales_with_curvature(self):
        prob = QpProblem([[2.0]], [0.0], [[1.0]], [1.0], [np.inf])
        res = kkt_residual(prob, np.array([1.1]), np.array([2.0]))
        assert res >= 0.1 * 2.0 - 1e-12  # min curvature of H is 2

    def test_zero_problem_feasible_point(self):
        prob = QpProblem(np.zeros((2, 2)), np.zeros(2), [[1.0, 1.0]], [-1.0], [1.0])
        assert kkt_residual(prob, np.array([0.1, 0.2]), np.zeros(1)) == 0.0


class TestAgainstProjectedGradientOracle:
    def test_random_problems_match_oracle(self):
        rng = np.random.default_rng(42)
        probs = [make_random_problem(rng) for _ in range(10)]
        sols = [solve(p) for p in probs]
        assert all(s.status == "optimal" for s in sols)
        assert all(s.kkt_residual <= 1e-8 for s in sols)
        Hs = np.stack([p.H for p in probs])
        gs = np.stack([p.g for p in probs])
        As = np.stack([p.A for p in probs])
        ls = np.stack([p.l for p in probs])
        us = np.stack([p.u for p in probs])
        _, obj_oracle = dual_projected_gradient_qp_batch(Hs, gs, As, ls, us, iters=1_000_000)
        for p, s, ref in zip(probs, sols, obj_oracle):
            assert objective(p, s.x) == pytest.approx(ref, abs=1e-5)


class TestProperties:
    def test_returned_x_beats_random_feasible_samples(self):
        rng = np.random.default_rng(7)
        prob = make_random_problem(rng)
        sol = solve(prob)
        best = objective(prob, sol.x)
        found = 0
        for _ in range(1000):
            x = sol.x + rng.normal(scale=0.5, size=len(sol.x))
            ax = prob.A @ x
            if np.all(ax >= prob.l - 1e-12) and np.all(ax <= prob.u + 1e-12):
                found += 1
                assert objective(prob, x) >= best - 1e-9
        assert found > 0

    def test_scaling_invariance_of_argmin(self):
        rng = np.random.default_rng(11)
        prob = make_random_problem(rng)
        sol1 = solve(prob)
        scaled = QpProblem(prob.H * 7.5, prob.g * 7.5, prob.A, prob.l, prob.u)
        sol2 = solve(scaled)
        assert np.allclose(sol1.x, sol2.x, atol=1e-7)

    def test_deterministic(self):
        rng = np.random.default_rng(13)
        prob = make_random_problem(rng)
        a = solve(prob)
        b = solve(prob)
        assert np.array_equal(a.x, b.x)
        assert a.iterations == b.iterations
        assert a.status == b.status

from __future__ import annotations

import numpy as np
import pytest

from aerotrack.obvp import T_MIN, KinoState, fixed_T_cost, sample, solve, solve_batch

from helpers import discretized_min_energy_cost, golden_section_min, simpson


def rand_state(rng, p_scale=3.0, v_scale=2.0):
    return KinoState(rng.normal(scale=p_scale, size=3), rng.normal(scale=v_scale, size=3))


class TestFixedTCost:
    def test_free_drift_costs_only_time(self):
        a = KinoState([0.0, 1.0, 2.0], [0.5, -0.3, 0.1])
        T, rho = 1.7, 2.0
        b = KinoState(a.p + a.v * T, a.v)
        assert fixed_T_cost(a, b, T, rho) == pytest.approx(rho * T, abs=1e-12)

    def test_rest_to_rest_unit_displacement(self):
        a = KinoState([0, 0, 0], [0, 0, 0])
        b = KinoState([1, 0, 0], [0, 0, 0])
        assert fixed_T_cost(a, b, 1.0, 0.0) == pytest.approx(12.0, abs=1e-12)

    def test_cubic_time_scaling(self):
        a = KinoState([0, 0, 0], [0, 0, 0])
        b = KinoState([1, 0, 0], [0, 0, 0])
        assert fixed_T_cost(a, b, 2.0, 0.0) == pytest.approx(1.5, abs=1e-12)

    def test_matches_discretized_optimal_control(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            a, b = rand_state(rng), rand_state(rng)
            T = rng.uniform(0.5, 4.0)
            closed = fixed_T_cost(a, b, T, 0.0)
            oracle = discretized_min_energy_cost(a.p, a.v, b.p, b.v, T, steps=2000)
            assert closed == pytest.approx(oracle, rel=1e-3, abs=1e-9)


class TestSolve:
    def test_coincident_states_at_rest(self):
        a = KinoState([1, 2, 0.5], [0, 0, 0])
        sol = solve(a, a, rho=3.0)
        assert sol.T_star == pytest.approx(T_MIN, rel=1e-6)
        assert sol.cost <= 3.0 * T_MIN + 1e-12
        assert sol.flagged  # stationarity quartic has no positive root

    def test_rest_to_rest_matches_golden_section(self):
        a = KinoState([0, 0, 0], [0, 0, 0])
        b = KinoState([1, 0, 0], [0, 0, 0])
        sol = solve(a, b, rho=1.0)
        t_ref, c_ref = golden_section_min(lambda T: fixed_T_cost(a, b, T, 1.0), 1e-3, 50.0)
        assert sol.T_star == pytest.approx(t_ref, abs=1e-6)
        assert sol.cost == pytest.approx(c_ref, abs=1e-6)
        # analytic value: T* = (3*12/rho)^(1/4)
        assert sol.T_star == pytest.approx(36.0**0.25, rel=1e-9)

    def test_minimality_over_random_durations(self):
        rng = np.random.default_rng(5)
        a, b = rand_state(rng), rand_state(rng)
        sol = solve(a, b, rho=1.5)
        for _ in range(100):
            T = rng.uniform(1e-3, 50.0)
            assert sol.cost <= fixed_T_cost(a, b, T, 1.5) + 1e-9

    def test_random_pairs_match_golden_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(25):
            a, b = rand_state(rng), rand_state(rng)
            rho = rng.uniform(0.3, 4.0)
            sol = solve(a, b, rho)
            t_ref, c_ref = golden_section_min(lambda T: fixed_T_cost(a, b, T, rho), 1e-3, 50.0)
            assert sol.T_star == pytest.approx(t_ref, abs=1e-5)
            assert sol.cost == pytest.approx(c_ref, rel=1e-9, abs=1e-9)

    def test_batch_agrees_with_scalar(self):
        rng = np.random.default_rng(3)
        states = [(rand_state(rng), rand_state(rng)) for _ in range(40)]
        pa = np.stack([s[0].p for s in states])
        va = np.stack([s[0].v for s in states])
        pb = np.stack([s[1].p for s in states])
        vb = np.stack([s[1].v for s in states])
        T, cost, _ = solve_batch(pa, va, pb, vb, rho=1.0)
        for i, (a, b) in enumerate(states):
            sol = solve(a, b, rho=1.0)
            assert T[i] == pytest.approx(sol.T_star, rel=1e-9)
            assert cost[i] == pytest.approx(sol.cost, rel=1e-9)


class TestSample:
    def test_boundary_conditions(self):
        rng = np.random.default_rng(8)
        a, b = rand_state(rng), rand_state(rng)
        sol = solve(a, b, rho=1.0)
        p0, v0, _ = sample(sol, 0.0)
        pT, vT, _ = sample(sol, sol.T_star)
        assert np.allclose(p0, a.p, atol=1e-9)
        assert np.allclose(v0, a.v, atol=1e-9)
        assert np.allclose(pT, b.p, atol=1e-9)
        assert np.allclose(vT, b.v, atol=1e-9)

    def test_quadrature_recovers_cost(self):
        rng = np.random.default_rng(9)
        a, b = rand_state(rng), rand_state(rng)
        rho = 2.0
        sol = solve(a, b, rho)
        energy = simpson(
            lambda t: float(np.sum(sample(sol, t)[2] ** 2)), 0.0, sol.T_star, n_panels=400
        )
        assert energy + rho * sol.T_star == pytest.approx(sol.cost, rel=1e-6)

    def test_out_of_domain_rejected(self):
        a = KinoState([0, 0, 0], [0, 0, 0])
        b = KinoState([1, 0, 0], [0, 0, 0])
        sol = solve(a, b, rho=1.0)
        with pytest.raises(ValueError):
            sample(sol, sol.T_star + 1.0)


class TestProperties:
    def test_translation_invariance(self):
        rng = np.random.default_rng(14)
        a, b = rand_state(rng), rand_state(rng)
        shift = rng.normal(scale=10.0, size=3)
        sol1 = solve(a, b, rho=1.0)
        sol2 = solve(KinoState(a.p + shift, a.v), KinoState(b.p + shift, b.v), rho=1.0)
        assert sol2.cost == pytest.approx(sol1.cost, rel=1e-9)
        assert sol2.T_star == pytest.approx(sol1.T_star, rel=1e-9)

    def test_axis_separability_of_fixed_T_cost(self):
        rng = np.random.default_rng(15)
        a, b = rand_state(rng), rand_state(rng)
        T = 1.3
        total = fixed_T_cost(a, b, T, 0.0)
        per_axis = 0.0
        for ax in range(3):
            pa = np.zeros(3)
            pb = np.zeros(3)
            va = np.zeros(3)
            vb = np.zeros(3)
            pa[0], pb[0], va[0], vb[0] = a.p[ax], b.p[ax], a.v[ax], b.v[ax]
            per_axis += fixed_T_cost(KinoState(pa, va), KinoState(pb, vb), T, 0.0)
        assert per_axis == pytest.approx(total, rel=1e-12)

    def test_cost_at_least_time_charge(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            a, b = rand_state(rng), rand_state(rng)
            sol = solve(a, b, rho=2.5)
            assert sol.cost >= 2.5 * sol.T_star - 1e-9
            assert sol.T_star > 0

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aerotrack.bezier import BezierCurve, accel_gram, bernstein_basis, bernstein_mass_matrix

from helpers import bernstein_term, simpson


def random_curve(rng, n=5, t0=0.0, t1=3.5):
    pts = rng.normal(scale=2.0, size=(n + 1, 3))
    return BezierCurve(pts, t0, t1)


class TestBernsteinBasis:
    def test_endpoint_identity(self):
        assert np.allclose(bernstein_basis(2, 0.0), [1, 0, 0])
        assert np.allclose(bernstein_basis(2, 1.0), [0, 0, 1])

    def test_symmetric_midpoint(self):
        assert np.allclose(bernstein_basis(2, 0.5), [0.25, 0.5, 0.25])

    def test_matches_binomial_formula(self):
        u = 0.3
        got = bernstein_basis(5, u)
        want = [bernstein_term(5, i, u) for i in range(6)]
        assert np.allclose(got, want, atol=1e-14)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            bernstein_basis(3, 1.5)

    @given(st.floats(min_value=0.0, max_value=1.0), st.integers(min_value=1, max_value=9))
    def test_partition_of_unity_and_nonnegative(self, u, n):
        b = bernstein_basis(n, u)
        assert np.all(b >= -1e-15)
        assert abs(b.sum() - 1.0) < 1e-12

    def test_partition_of_unity_many_samples(self):
        rng = np.random.default_rng(3)
        u = rng.uniform(size=1000)
        b = bernstein_basis(5, u)
        assert np.allclose(b.sum(axis=1), 1.0, atol=1e-12)


class TestEval:
    def test_constant_curve(self):
        c = np.tile([1.0, -2.0, 0.5], (6, 1))
        curve = BezierCurve(c, 0.0, 2.0)
        for t in (0.0, 0.7, 2.0):
            assert np.allclose(curve.eval(t), [1.0, -2.0, 0.5])
            assert np.allclose(curve.eval(t, order=1), 0.0)
            assert np.allclose(curve.eval(t, order=2), 0.0)

    def test_linear_segment_velocity(self):
        curve = BezierCurve(np.array([[0.0, 0, 0], [1.0, 0, 0]]), 0.0, 2.0)
        assert np.allclose(curve.eval(1.3, order=1), [0.5, 0, 0])

    def test_endpoint_interpolation(self):
        rng = np.random.default_rng(0)
        curve = random_curve(rng)
        assert np.allclose(curve.eval(curve.t_start), curve.control_points[0])
        assert np.allclose(curve.eval(curve.t_end), curve.control_points[-1])

    def test_derivative_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        curve = random_curve(rng)
        h = 1e-6
        for t in np.linspace(0.2, 3.3, 7):
            fd = (curve.eval(t + h) - curve.eval(t - h)) / (2 * h)
            v = curve.eval(t, order=1)
            assert np.allclose(v, fd, rtol=1e-6, atol=1e-6)

    def test_second_derivative_matches_finite_difference(self):
        rng = np.random.default_rng(2)
        curve = random_curve(rng)
        h = 1e-5
        for t in np.linspace(0.2, 3.3, 5):
            fd = (curve.eval(t + h) - 2 * curve.eval(t) + curve.eval(t - h)) / h**2
            a = curve.eval(t, order=2)
            assert np.allclose(a, fd, rtol=1e-4, atol=1e-4)

    def test_convex_hull_property(self):
        rng = np.random.default_rng(4)
        curve = random_curve(rng)
        lo = curve.control_points.min(axis=0) - 1e-12
        hi = curve.control_points.max(axis=0) + 1e-12
        ts = np.linspace(curve.t_start, curve.t_end, 200)
        pts = curve.eval(ts)
        assert np.all(pts >= lo) and np.all(pts <= hi)

    def test_hodograph_control_points(self):
        rng = np.random.default_rng(5)
        curve = random_curve(rng)
        n, s_t = curve.degree, curve.s_t
        c = curve.control_points
        vel_pts = n * (c[1:] - c[:-1]) / s_t
        hodo = curve.hodograph()
        assert np.allclose(hodo.control_points, vel_pts)
        acc_pts = (n - 1) * (vel_pts[1:] - vel_pts[:-1]) / s_t
        want = n * (n - 1) * (c[2:] - 2 * c[1:-1] + c[:-2]) / s_t**2
        assert np.allclose(acc_pts, want)
        # evaluating the hodograph reproduces eval(order=1)
        for t in np.linspace(0.0, 3.5, 9):
            assert np.allclose(hodo.eval(t), curve.eval(t, order=1), atol=1e-12)

    def test_domain_violation(self):
        curve = BezierCurve(np.zeros((3, 3)), 0.0, 1.0)
        with pytest.raises(ValueError):
            curve.eval(1.5)


class TestAccelGram:
    def test_line_has_zero_matrix(self):
        assert np.allclose(accel_gram(1, 2.0, 0.0, 2.0), 0.0)

    def test_straight_control_polygon_zero_energy(self):
        # affine curve: control points equally spaced on a line
        n, s_t = 5, 2.5
        c = np.linspace(-1.0, 3.0, n + 1)
        g = accel_gram(n, s_t, 0.0, s_t)
        assert abs(c @ g @ c) < 1e-12

    def test_matches_simpson_quadrature(self):
        rng = np.random.default_rng(7)
        n, s_t = 5, 3.5
        c = rng.normal(size=n + 1)
        curve = BezierCurve(np.column_stack([c, np.zeros(n + 1), np.zeros(n + 1)]), 0.0, s_t)
        for t_lo, t_hi in [(0.0, s_t), (0.4, 2.9), (1.0, 1.5)]:
            g = accel_gram(n, s_t, t_lo, t_hi)
            want = simpson(lambda t: curve.eval(t, order=2)[0] ** 2, t_lo, t_hi, n_panels=600)
            got = c @ g @ c
            assert got == pytest.approx(want, rel=1e-8)

    def test_symmetric_psd(self):
        g = accel_gram(5, 2.0, 0.3, 1.7)
        assert np.allclose(g, g.T)
        assert np.linalg.eigvalsh(g).min() > -1e-12

    def test_mass_matrix_full_interval_closed_form(self):
        from math import comb

        m = 3
        got = bernstein_mass_matrix(m)
        for i in range(m + 1):
            for j in range(m + 1):
                want = comb(m, i) * comb(m, j) / ((2 * m + 1) * comb(2 * m, i + j))
                assert got[i, j] == pytest.approx(want, rel=1e-13)

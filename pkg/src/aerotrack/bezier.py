"""Bernstein-basis polynomial curves over a physical time interval.

A degree-n curve is B(t) = sum_i c_i * b_n_i(u) with u = (t - t_start) / s_t
and s_t = t_end - t_start. Derivatives are taken in physical time, so the
order-k hodograph carries a 1/s_t**k factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np


def bernstein_basis(n: int, u) -> np.ndarray:
    """Evaluate all n+1 Bernstein basis polynomials of degree n at u.

    u may be a scalar in [0, 1] or an array; the basis index is the last
    axis of the result. Entries are non-negative and sum to 1.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    u = np.asarray(u, dtype=float)
    if np.any(u < -1e-12) or np.any(u > 1.0 + 1e-12):
        raise ValueError("basis parameter outside [0, 1]")
    u = np.clip(u, 0.0, 1.0)
    i = np.arange(n + 1)
    coef = np.array([comb(n, k) for k in i], dtype=float)
    out = coef * u[..., None] ** i * (1.0 - u[..., None]) ** (n - i)
    return out


def _difference_points(points: np.ndarray, order: int, s_t: float) -> np.ndarray:
    """Control points of the order-k hodograph in physical units."""
    pts = points
    n = len(points) - 1
    for _ in range(order):
        if n == 0:
            return np.zeros((1,) + pts.shape[1:])
        pts = n * (pts[1:] - pts[:-1]) / s_t
        n -= 1
    return pts


@dataclass
class BezierCurve:
    """Degree-n curve with (n+1, 3) control points on [t_start, t_end]."""

    control_points: np.ndarray
    t_start: float
    t_end: float

    def __post_init__(self) -> None:
        self.control_points = np.asarray(self.control_points, dtype=float)
        if self.control_points.ndim != 2 or self.control_points.shape[1] != 3:
            raise ValueError("control points must have shape (n+1, 3)")
        if self.control_points.shape[0] < 2:
            raise ValueError("need degree >= 1 (at least two control points)")
        if not self.t_end > self.t_start:
            raise ValueError("time interval must have positive length")

    @property
    def degree(self) -> int:
        return self.control_points.shape[0] - 1

    @property
    def s_t(self) -> float:
        return self.t_end - self.t_start

    def eval(self, t, order: int = 0) -> np.ndarray:
        """Order-k derivative of the curve at physical time(s) t.

        Scalar t gives a (3,) vector, an array of times gives (len(t), 3).
        t must lie within [t_start, t_end]; a small tolerance absorbs
        floating-point rounding at the endpoints.
        """
        if order not in (0, 1, 2):
            raise ValueError("derivative order must be 0, 1, or 2")
        t_arr = np.asarray(t, dtype=float)
        tol = 1e-9 * max(1.0, abs(self.t_end), abs(self.t_start))
        if np.any(t_arr < self.t_start - tol) or np.any(t_arr > self.t_end + tol):
            raise ValueError("evaluation time outside curve domain")
        u = (t_arr - self.t_start) / self.s_t
        pts = _difference_points(self.control_points, order, self.s_t)
        basis = bernstein_basis(len(pts) - 1, np.clip(u, 0.0, 1.0))
        return basis @ pts

    def hodograph(self) -> "BezierCurve":
        """The derivative curve (physical units) on the same interval."""
        if self.degree < 2:
            pts = np.repeat(_difference_points(self.control_points, 1, self.s_t), 2, axis=0)
        else:
            pts = _difference_points(self.control_points, 1, self.s_t)
        return BezierCurve(pts, self.t_start, self.t_end)


def _partial_basis_integrals(big_n: int, idx: np.ndarray, x: float) -> np.ndarray:
    """Integrals of b_{big_n}^{idx}(u) du from 0 to x, for an index array."""
    tail = bernstein_basis(big_n + 1, x)
    csum = np.concatenate([np.cumsum(tail[::-1])[::-1], [0.0]])
    return csum[idx + 1] / (big_n + 1)


def bernstein_mass_matrix(m: int, u_lo: float = 0.0, u_hi: float = 1.0) -> np.ndarray:
    """Matrix of pairwise products integrated over [u_lo, u_hi] in unit time.

    M[i, j] = integral of b_m_i(u) * b_m_j(u) du. Uses the product identity
    b_m_i * b_m_j = (C(m,i)C(m,j)/C(2m,i+j)) * b_{2m}^{i+j} plus the exact
    partial-integral expansion of a single basis function.
    """
    if m < 0:
        raise ValueError("degree must be non-negative")
    i = np.arange(m + 1)
    ci = np.array([comb(m, k) for k in i], dtype=float)
    ksum = i[:, None] + i[None, :]
    c2 = np.array([comb(2 * m, k) for k in range(2 * m + 1)], dtype=float)
    scale = ci[:, None] * ci[None, :] / c2[ksum]
    flat = ksum.ravel()
    part = _partial_basis_integrals(2 * m, flat, u_hi) - _partial_basis_integrals(2 * m, flat, u_lo)
    return scale * part.reshape(ksum.shape)


def accel_gram(n: int, s_t: float, t_lo: float, t_hi: float) -> np.ndarray:
    """Gram matrix G of the squared second derivative in physical time.

    For one axis with control-point vector c, c @ G @ c equals the integral
    of B''(t)**2 over [t_lo, t_hi], where t_lo/t_hi are offsets from the
    curve start (so the full domain is [0, s_t]). Symmetric PSD; zero for
    n < 2 since a line has no curvature.
    """
    if s_t <= 0:
        raise ValueError("time scale must be positive")
    if not t_lo < t_hi:
        raise ValueError("need t_lo < t_hi")
    if n < 2:
        return np.zeros((n + 1, n + 1))
    m = n - 2
    # second-difference operator carrying the physical 1/s_t**2 scaling
    d = np.zeros((m + 1, n + 1))
    for j in range(m + 1):
        d[j, j] = 1.0
        d[j, j + 1] = -2.0
        d[j, j + 2] = 1.0
    d *= n * (n - 1) / s_t**2
    mass = bernstein_mass_matrix(m, t_lo / s_t, t_hi / s_t)
    g = s_t * d.T @ mass @ d
    return 0.5 * (g + g.T)

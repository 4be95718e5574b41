"""Shared independent oracles used across the test suite.

These deliberately avoid the library's own code paths: brute-force
sampling, quadrature, discretized optimal control, coarse-scan + golden
section, and a dual projected-gradient QP solver.
"""

from __future__ import annotations

from math import comb

import numpy as np


def bernstein_term(n: int, i: int, u: float) -> float:
    """Direct binomial-formula evaluation of one basis polynomial."""
    return comb(n, i) * u**i * (1.0 - u) ** (n - i)


def simpson(f, lo: float, hi: float, n_panels: int = 400) -> float:
    """Composite Simpson quadrature of a scalar function."""
    xs = np.linspace(lo, hi, 2 * n_panels + 1)
    ys = np.array([f(x) for x in xs])
    h = (hi - lo) / (2 * n_panels)
    return h / 3.0 * (ys[0] + ys[-1] + 4 * ys[1:-1:2].sum() + 2 * ys[2:-1:2].sum())


def central_difference(f, x: float, h: float = 1e-6) -> float:
    return (f(x + h) - f(x - h)) / (2 * h)


def discretized_min_energy_cost(
    pa: np.ndarray, va: np.ndarray, pb: np.ndarray, vb: np.ndarray, T: float, steps: int = 2000
) -> float:
    """Fine-grid optimal-control oracle for the double integrator.

    Piecewise-constant acceleration over `steps` intervals; the minimum of
    sum(u_k**2)*dt subject to the endpoint equality constraints is the
    minimum-norm solution of an underdetermined linear system, solved per
    axis with the pseudoinverse.
    """
    dt = T / steps
    # v(T) = va + dt * sum(u_k); p(T) = pa + va*T + sum(u_k * dt * (T - (k+0.5)dt))
    k = np.arange(steps)
    row_v = np.full(steps, dt)
    row_p = dt * (T - (k + 0.5) * dt)
    A = np.vstack([row_v, row_p])
    total = 0.0
    for ax in range(len(pa)):
        rhs = np.array([vb[ax] - va[ax], pb[ax] - pa[ax] - va[ax] * T])
        u = np.linalg.pinv(A) @ rhs
        total += float(u @ u) * dt
    return total


def golden_section_min(f, lo: float, hi: float, tol: float = 1e-10, scan: int = 4000):
    """Coarse log-spaced scan followed by golden-section refinement.

    Returns (x_min, f_min). The scan guards against multimodality before
    golden section narrows the bracket.
    """
    xs = np.geomspace(lo, hi, scan)
    vals = np.array([f(x) for x in xs])
    j = int(np.argmin(vals))
    a = xs[max(j - 1, 0)]
    b = xs[min(j + 1, scan - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def dual_projected_gradient_qp(
    H: np.ndarray,
    g: np.ndarray,
    A: np.ndarray,
    l: np.ndarray,
    u: np.ndarray,
    iters: int = 1_000_000,
) -> tuple[np.ndarray, float]:
    """Long-horizon projected-gradient oracle for box-constrained-row QPs.

    Runs projected gradient ascent on the dual of
    min 0.5 x'Hx + g'x  s.t.  l <= Ax <= u, recovering the primal iterate
    x(lam) = -Hinv (g + A'(lam_u - lam_l)). H must be positive definite.
    Returns (x, objective).
    """
    Hinv = np.linalg.inv(H)
    m = A.shape[0]
    lam_l = np.zeros(m)
    lam_u = np.zeros(m)
    AHiAt = A @ Hinv @ A.T
    L = np.linalg.eigvalsh(AHiAt).max()
    step = 1.0 / max(L, 1e-12)
    l_fin = np.where(np.isfinite(l), l, -1e30)
    u_fin = np.where(np.isfinite(u), u, 1e30)
    for _ in range(iters):
        x = -Hinv @ (g + A.T @ (lam_u - lam_l))
        Ax = A @ x
        lam_u = np.maximum(0.0, lam_u + step * (Ax - u_fin))
        lam_l = np.maximum(0.0, lam_l + step * (l_fin - Ax))
    x = -Hinv @ (g + A.T @ (lam_u - lam_l))
    obj = 0.5 * x @ H @ x + g @ x
    return x, float(obj)


def dual_projected_gradient_qp_batch(
    Hs: np.ndarray,
    gs: np.ndarray,
    As: np.ndarray,
    ls: np.ndarray,
    us: np.ndarray,
    iters: int = 1_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized form of dual_projected_gradient_qp over stacked problems."""
    Hinv = np.linalg.inv(Hs)
    nprob, m, _ = As.shape
    lam_l = np.zeros((nprob, m))
    lam_u = np.zeros((nprob, m))
    AHiAt = As @ Hinv @ np.swapaxes(As, 1, 2)
    L = np.linalg.eigvalsh(AHiAt).max(axis=1)
    step = (1.0 / np.maximum(L, 1e-12))[:, None]
    l_fin = np.where(np.isfinite(ls), ls, -1e30)
    u_fin = np.where(np.isfinite(us), us, 1e30)
    At = np.swapaxes(As, 1, 2)
    for _ in range(iters):
        x = -np.einsum("pij,pj->pi", Hinv, gs + np.einsum("pij,pj->pi", At, lam_u - lam_l))
        Ax = np.einsum("pij,pj->pi", As, x)
        lam_u = np.maximum(0.0, lam_u + step * (Ax - u_fin))
        lam_l = np.maximum(0.0, lam_l + step * (l_fin - Ax))
    x = -np.einsum("pij,pj->pi", Hinv, gs + np.einsum("pij,pj->pi", At, lam_u - lam_l))
    obj = 0.5 * np.einsum("pi,pij,pj->p", x, Hs, x) + np.einsum("pi,pi->p", gs, x)
    return x, obj


def point_in_cylinder(p: np.ndarray, cx: float, cy: float, r: float, h: float) -> bool:
    return (p[0] - cx) ** 2 + (p[1] - cy) ** 2 <= r * r and 0.0 <= p[2] <= h


def point_in_box(p: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    return bool(np.all(p >= lo) and np.all(p <= hi))

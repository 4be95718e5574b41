"""Closed-form energy-time boundary value problem for a double integrator.

Connecting state a = (p, v) to state b with acceleration control u over a
free duration T, the minimum of integral(|u|^2) + rho*T has a closed-form
per-duration cost; the optimal duration is a positive real root of a
quartic. The realized trajectory is a cubic per axis. Used as the search
heuristic distance and for analytic goal connection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

T_MIN = 1e-3
T_MAX = 50.0


@dataclass
class KinoState:
    """Position/velocity point of the double-integrator state space."""

    p: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.v))):
            raise ValueError("state components must be finite")


@dataclass
class ObvpSolution:
    """Optimal duration, cost, and per-axis cubic position coefficients.

    coeffs[axis] = (c0, c1, c2, c3) for p(t) = c0 + c1 t + c2 t^2 + c3 t^3
    on t in [0, T_star]. `flagged` marks durations found by the scalar
    fallback minimizer rather than a quartic root.
    """

    T_star: float
    cost: float
    coeffs: np.ndarray
    flagged: bool = False


def fixed_T_cost(a: KinoState, b: KinoState, T: float, rho: float) -> float:
    """Minimum energy cost for a fixed duration plus the time charge rho*T."""
    if T <= 0:
        raise ValueError("duration must be positive")
    dp = b.p - a.p - a.v * T
    dv = b.v - a.v
    return float(rho * T + np.sum(12 * dp**2 / T**3 - 12 * dp * dv / T**2 + 4 * dv**2 / T))


def _cost_series(pa, va, pb, vb):
    """Coefficients of f(T) = rho*T + c1/T + c2/T^2 + c3/T^3 (batched)."""
    d = pb - pa
    c1 = 4.0 * (np.sum(va * va, axis=-1) + np.sum(va * vb, axis=-1) + np.sum(vb * vb, axis=-1))
    c2 = -12.0 * np.sum(d * (va + vb), axis=-1)
    c3 = 12.0 * np.sum(d * d, axis=-1)
    return c1, c2, c3


def _eval_cost(T, rho, c1, c2, c3):
    return rho * T + c1 / T + c2 / T**2 + c3 / T**3


def _golden_min(rho, c1, c2, c3, lo=T_MIN, hi=T_MAX):
    xs = np.geomspace(lo, hi, 512)
    vals = _eval_cost(xs, rho, c1, c2, c3)
    j = int(np.argmin(vals))
    a, b = xs[max(j - 1, 0)], xs[min(j + 1, len(xs) - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _eval_cost(c, rho, c1, c2, c3)
    fd = _eval_cost(d, rho, c1, c2, c3)
    while b - a > 1e-10:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _eval_cost(c, rho, c1, c2, c3)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _eval_cost(d, rho, c1, c2, c3)
    cands = np.array([lo, 0.5 * (a + b), hi])
    return float(cands[np.argmin(_eval_cost(cands, rho, c1, c2, c3))])


def solve_batch(pa: np.ndarray, va: np.ndarray, pb: np.ndarray, vb: np.ndarray, rho: float):
    """Optimal durations and costs for stacked state pairs.

    Inputs are (N, 3) arrays; returns (T (N,), cost (N,), flagged (N,)).
    The stationarity quartic rho*T^4 - c1*T^2 - 2*c2*T - 3*c3 = 0 is solved
    by companion-matrix eigenvalues; rows without a positive real root fall
    back to a scalar scan-plus-golden-section minimization and are flagged.
    """
    if rho <= 0:
        raise ValueError("rho must be positive for a finite optimal duration")
    pa = np.atleast_2d(pa)
    va = np.atleast_2d(va)
    pb = np.atleast_2d(pb)
    vb = np.atleast_2d(vb)
    n = pa.shape[0]
    c1, c2, c3 = _cost_series(pa, va, pb, vb)

    comp = np.zeros((n, 4, 4))
    comp[:, 1, 0] = 1.0
    comp[:, 2, 1] = 1.0
    comp[:, 3, 2] = 1.0
    comp[:, 0, 3] = 3.0 * c3 / rho
    comp[:, 1, 3] = 2.0 * c2 / rho
    comp[:, 2, 3] = c1 / rho
    roots = np.linalg.eigvals(comp)

    real = np.abs(roots.imag) <= 1e-7 * (1.0 + np.abs(roots.real))
    positive = roots.real > 1e-9
    ok = real & positive
    cand = np.where(ok, np.clip(roots.real, T_MIN, T_MAX), np.nan)
    cand = np.concatenate([cand, np.full((n, 1), T_MIN), np.full((n, 1), T_MAX)], axis=1)
    with np.errstate(invalid="ignore"):
        costs = _eval_cost(cand, rho, c1[:, None], c2[:, None], c3[:, None])
    costs = np.where(np.isnan(costs), np.inf, costs)
    best = np.argmin(costs, axis=1)
    T = cand[np.arange(n), best]
    flagged = ~ok.any(axis=1)
    for i in np.nonzero(flagged)[0]:
        T[i] = _golden_min(rho, c1[i], c2[i], c3[i])
    cost = _eval_cost(T, rho, c1, c2, c3)
    return T, cost, flagged


def _cubic_coeffs(a: KinoState, b: KinoState, T: float) -> np.ndarray:
    dp = b.p - a.p - a.v * T
    dv = b.v - a.v
    alpha = 6.0 * dv / T**2 - 12.0 * dp / T**3
    beta = -2.0 * dv / T + 6.0 * dp / T**2
    return np.column_stack([a.p, a.v, beta / 2.0, alpha / 6.0])


def solve(a: KinoState, b: KinoState, rho: float) -> ObvpSolution:
    """Minimize fixed_T_cost over the duration and realize the trajectory."""
    T, _, flagged = solve_batch(a.p[None], a.v[None], b.p[None], b.v[None], rho)
    T_star = float(T[0])
    cost = fixed_T_cost(a, b, T_star, rho)
    return ObvpSolution(T_star=T_star, cost=cost, coeffs=_cubic_coeffs(a, b, T_star), flagged=bool(flagged[0]))


def sample(sol: ObvpSolution, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Position, velocity, acceleration of the optimal cubic at time(s) t."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-9) or np.any(t_arr > sol.T_star + 1e-9):
        raise ValueError("sample time outside [0, T_star]")
    c = sol.coeffs  # (3, 4)
    powers = t_arr[..., None] ** np.arange(4)
    p = powers @ c.T
    dpow = np.stack(
        [np.zeros_like(t_arr), np.ones_like(t_arr), 2 * t_arr, 3 * t_arr**2], axis=-1
    )
    v = dpow @ c.T
    apow = np.stack([np.zeros_like(t_arr), np.zeros_like(t_arr), 2 * np.ones_like(t_arr), 6 * t_arr], axis=-1)
    acc = apow @ c.T
    return p, v, acc

"""Small dense convex QP solver: min 0.5 x'Hx + g'x  s.t.  l <= Ax <= u.

Active-set method of the Goldfarb-Idnani family: start at the unconstrained
minimum, repeatedly activate the most violated constraint while keeping the
working-set multipliers non-negative. Each step solves a Cholesky-backed
equality-constrained subproblem. Suited to the small, dense, repeatedly
solved problems this package builds (tens of variables, tens of rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
_REGULARIZATION = 1e-9


@dataclass
class QpProblem:
    """Convex QP data. H symmetric PSD, row bounds may be +-inf."""

    H: np.ndarray
    g: np.ndarray
    A: np.ndarray
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        self.H = np.asarray(self.H, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        n = self.g.shape[0]
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.l = np.asarray(self.l, dtype=float).ravel()
        self.u = np.asarray(self.u, dtype=float).ravel()
        if self.H.shape != (n, n):
            raise ValueError("H/g dimension mismatch")
        if not np.allclose(self.H, self.H.T, atol=1e-10):
            raise ValueError("H must be symmetric within 1e-10")
        if self.l.shape != (self.A.shape[0],) or self.u.shape != (self.A.shape[0],):
            raise ValueError("bound/constraint dimension mismatch")
        if np.any(self.l > self.u):
            raise ValueError("need l <= u row-wise")


@dataclass
class QpSolution:
    x: np.ndarray
    status: str  # optimal | infeasible | max_iter
    kkt_residual: float
    iterations: int
    multipliers: np.ndarray = field(default=None)  # signed per-row (+ lower, - upper)


def kkt_residual(prob: QpProblem, x: np.ndarray, multipliers: np.ndarray) -> float:
    """Max of stationarity, primal-feasibility, and complementarity norms.

    Multipliers are signed per constraint row: positive enforces the lower
    bound, negative the upper. Zero at an exact optimum.
    """
    x = np.asarray(x, dtype=float)
    mu = np.asarray(multipliers, dtype=float)
    stat = np.abs(prob.H @ x + prob.g - prob.A.T @ mu).max() if x.size else 0.0
    if prob.A.shape[0] == 0:
        return float(stat)
    ax = prob.A @ x
    lo_gap = np.where(np.isfinite(prob.l), ax - prob.l, np.inf)
    hi_gap = np.where(np.isfinite(prob.u), prob.u - ax, np.inf)
    feas = max(0.0, float(np.max(-lo_gap, initial=0.0)), float(np.max(-hi_gap, initial=0.0)))
    comp = 0.0
    for i in range(prob.A.shape[0]):
        if mu[i] > 0 and np.isfinite(prob.l[i]):
            comp = max(comp, abs(mu[i] * lo_gap[i]))
        elif mu[i] < 0 and np.isfinite(prob.u[i]):
            comp = max(comp, abs(mu[i] * hi_gap[i]))
    return float(max(stat, feas, comp))


def _cholesky_inverse(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """PD check via Cholesky, regularizing a rank-deficient H if needed."""
    reg = 0.0
    h = H
    for _ in range(8):
        try:
            np.linalg.cholesky(h)
            return h, np.linalg.inv(h)
        except np.linalg.LinAlgError:
            reg = _REGULARIZATION if reg == 0.0 else reg * 10.0
            h = H + reg * np.eye(H.shape[0])
    raise ValueError("H is not positive semidefinite (regularization failed)")


def solve(prob: QpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> QpSolution:
    """Solve the QP; deterministic for identical inputs.

    Returns status "optimal" with stationarity/feasibility/complementarity
    residuals <= tol, "infeasible" with the irreducible violation recorded
    as the kkt residual, or "max_iter" with the best iterate found.
    """
    n = prob.g.shape[0]
    H, Hinv = _cholesky_inverse(0.5 * (prob.H + prob.H.T))

    # one-sided expansion: normals @ x >= offsets
    normals, offsets, row_side = [], [], []
    for i in range(prob.A.shape[0]):
        if np.isfinite(prob.l[i]):
            normals.append(prob.A[i])
            offsets.append(prob.l[i])
            row_side.append((i, +1))
        if np.isfinite(prob.u[i]):
            normals.append(-prob.A[i])
            offsets.append(-prob.u[i])
            row_side.append((i, -1))
    normals = np.asarray(normals, dtype=float).reshape(-1, n)
    offsets = np.asarray(offsets, dtype=float)
    n_cons = normals.shape[0]

    x = -Hinv @ prob.g
    active: list[int] = []
    lam: list[float] = []
    iters = 0

    def row_multipliers() -> np.ndarray:
        mu = np.zeros(prob.A.shape[0])
        for idx, lam_k in zip(active, lam):
            row, side = row_side[idx]
            mu[row] += side * lam_k
        return mu

    while iters < max_iter:
        slack = normals @ x - offsets if n_cons else np.empty(0)
        if n_cons:
            slack_masked = slack.copy()
            slack_masked[active] = np.inf
            j = int(np.argmin(slack_masked))
            worst = slack_masked[j]
        else:
            worst = np.inf
        if worst >= -tol:
            mu = row_multipliers()
            res = kkt_residual(prob, x, mu)
            status = "optimal" if res <= max(tol, 1e-7) else "max_iter"
            return QpSolution(x=x, status=status, kkt_residual=res, iterations=iters, multipliers=mu)

        n_j = normals[j]
        lam_j = 0.0
        while iters < max_iter:
            iters += 1
            if active:
                Nw = normals[active]
                S = Nw @ Hinv @ Nw.T
                rhs = Nw @ Hinv @ n_j
                try:
                    r = np.linalg.solve(S, rhs)
                except np.linalg.LinAlgError:
                    r = np.linalg.lstsq(S, rhs, rcond=None)[0]
                z = Hinv @ (n_j - Nw.T @ r)
            else:
                r = np.empty(0)
                z = Hinv @ n_j

            ztn = float(z @ n_j)
            z_usable = ztn > 1e-12 * (1.0 + float(np.linalg.norm(z)) * float(np.linalg.norm(n_j)))

            t1 = np.inf
            k_block = -1
            for k, r_k in enumerate(r):
                if r_k > 1e-12:
                    ratio = lam[k] / r_k
                    if ratio < t1:
                        t1, k_block = ratio, k
            s_j = float(n_j @ x - offsets[j])
            t2 = (-s_j / ztn) if z_usable else np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                # constraint j cannot be satisfied: normals of the working
                # set dominate n_j with non-positive combination (Farkas)
                return QpSolution(
                    x=x,
                    status="infeasible",
                    kkt_residual=abs(s_j),
                    iterations=iters,
                    multipliers=row_multipliers(),
                )
            if z_usable:
                x = x + t * z
            lam = [lam_k - t * r_k for lam_k, r_k in zip(lam, r)]
            lam_j += t
            if t2 <= t1:
                active.append(j)
                lam.append(lam_j)
                break
            dropped = active.pop(k_block)
            lam.pop(k_block)
            del dropped

    mu = row_multipliers()
    return QpSolution(
        x=x, status="max_iter", kkt_residual=kkt_residual(prob, x, mu), iterations=iters, multipliers=mu
    )

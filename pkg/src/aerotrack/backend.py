"""Corridor-constrained spatial-temporal trajectory refinement.

The trajectory is a piecewise quintic per axis. For fixed interior
waypoints and piece durations, the minimum-jerk spline is the solution of
one linear system per axis (waypoint interpolation, full boundary state,
and maximal C4 continuity at free junctions). The outer problem moves the
waypoints and the log-durations to minimize smoothness plus a corridor
log-barrier on waypoints plus time/velocity/acceleration penalties, using
BFGS with a backtracking line search and central-difference gradients.
A splitting pass inserts midpoint waypoints into pieces that leave their
cube or exceed the dynamic bounds, then re-optimizes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from aerotrack.corridor import Corridor, Cube

_T_FLOOR = 1e-3
_MONO_GRAM3 = np.array([[1.0, 1 / 2, 1 / 3], [1 / 2, 1 / 3, 1 / 4], [1 / 3, 1 / 4, 1 / 5]])


@dataclass
class BackendConfig:
    kappa: float = 1e-2  # barrier weight
    rho_t: float = 20.0  # time penalty weight
    rho_v: float = 100.0  # velocity hinge weight
    rho_a: float = 100.0  # acceleration hinge weight
    v_m: float = 3.9  # max velocity, m/s
    a_m: float = 4.0  # max acceleration, m/s^2
    max_outer_iter: int = 30
    grad_tol: float = 1e-3
    max_splits: int = 6
    fd_step: float = 3e-7  # relative central-difference step

    def __post_init__(self) -> None:
        for name in ("kappa", "rho_t", "rho_v", "rho_a", "v_m", "a_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class BoundaryState:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        self.a = np.asarray(self.a, dtype=float).reshape(3)

    @classmethod
    def at_rest(cls, p) -> "BoundaryState":
        return cls(np.asarray(p, dtype=float), np.zeros(3), np.zeros(3))


@dataclass
class PiecewiseTrajectory:
    """Quintic pieces with normalized-time coefficients (M, 3, 6)."""

    coeffs: np.ndarray
    durations: np.ndarray
    feasible: bool = True
    degraded: bool = False
    cube_assignment: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        self.durations = np.asarray(self.durations, dtype=float)
        if self.coeffs.ndim != 3 or self.coeffs.shape[1] != 3 or self.coeffs.shape[2] != 6:
            raise ValueError("coefficients must have shape (M, 3, 6)")
        if np.any(self.durations <= 0):
            raise ValueError("piece durations must be positive")

    @property
    def n_pieces(self) -> int:
        return len(self.durations)

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())

    def _locate(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        edges = np.concatenate([[0.0], np.cumsum(self.durations)])
        t = np.clip(t, 0.0, edges[-1])
        idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, self.n_pieces - 1)
        s = (t - edges[idx]) / self.durations[idx]
        return idx, np.clip(s, 0.0, 1.0)

    def eval(self, t, order: int = 0) -> np.ndarray:
        """Position/velocity/acceleration at trajectory time(s) t (clamped)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx, s = self._locate(t_arr)
        k = np.arange(6)
        if order == 0:
            basis = s[:, None] ** k
        elif order == 1:
            basis = np.concatenate([np.zeros((len(s), 1)), k[1:] * s[:, None] ** (k[1:] - 1)], axis=1)
            basis = basis / self.durations[idx][:, None]
        elif order == 2:
            basis = np.concatenate(
                [np.zeros((len(s), 2)), (k[2:] * (k[2:] - 1)) * s[:, None] ** (k[2:] - 2)], axis=1
            )
            basis = basis / (self.durations[idx] ** 2)[:, None]
        else:
            raise ValueError("order must be 0, 1, or 2")
        out = np.einsum("nak,nk->na", self.coeffs[idx], basis)
        return out[0] if np.isscalar(t) or np.asarray(t).ndim == 0 else out

    def start_state(self) -> BoundaryState:
        return BoundaryState(self.eval(0.0), self.eval(0.0, 1), self.eval(0.0, 2))

    def end_state(self) -> BoundaryState:
        T = self.total_duration
        return BoundaryState(self.eval(T), self.eval(T, 1), self.eval(T, 2))


def _spline_system(times: np.ndarray) -> np.ndarray:
    """The (6M, 6M) interpolation/continuity matrix; rhs varies per axis."""
    m = len(times)
    A = np.zeros((6 * m, 6 * m))
    row = 0
    k = np.arange(6, dtype=float)
    fall1 = k.copy()  # k!/(k-1)!
    fall2 = k * (k - 1)
    fall3 = k * (k - 1) * (k - 2)
    fall4 = k * (k - 1) * (k - 2) * (k - 3)

    def val_row(piece, s, fall, order, T):
        out = np.zeros(6)
        for kk in range(order, 6):
            out[kk] = fall[kk] * s ** (kk - order) / T**order
        return out

    # start boundary: p, v, a of piece 0 at s=0
    A[row, 0:6] = val_row(0, 0.0, np.ones(6), 0, times[0])
    row += 1
    A[row, 0:6] = val_row(0, 0.0, fall1, 1, times[0])
    row += 1
    A[row, 0:6] = val_row(0, 0.0, fall2, 2, times[0])
    row += 1
    # end boundary of the last piece at s=1
    off = 6 * (m - 1)
    A[row, off : off + 6] = val_row(m - 1, 1.0, np.ones(6), 0, times[-1])
    row += 1
    A[row, off : off + 6] = val_row(m - 1, 1.0, fall1, 1, times[-1])
    row += 1
    A[row, off : off + 6] = val_row(m - 1, 1.0, fall2, 2, times[-1])
    row += 1
    # junctions
    for i in range(m - 1):
        li, ri = 6 * i, 6 * (i + 1)
        Ti, Tn = times[i], times[i + 1]
        # interpolation: both sides hit the waypoint (rhs carries q_i)
        A[row, li : li + 6] = val_row(i, 1.0, np.ones(6), 0, Ti)
        row += 1
        A[row, ri : ri + 6] = val_row(i + 1, 0.0, np.ones(6), 0, Tn)
        row += 1
        for order, fall in ((1, fall1), (2, fall2), (3, fall3), (4, fall4)):
            A[row, li : li + 6] = val_row(i, 1.0, fall, order, Ti)
            A[row, ri : ri + 6] -= val_row(i + 1, 0.0, fall, order, Tn)
            row += 1
    return A


def min_jerk(
    waypoints: np.ndarray,
    times: np.ndarray,
    start: BoundaryState,
    end: BoundaryState,
) -> tuple[PiecewiseTrajectory, float]:
    """Unique minimum-jerk piecewise quintic through the waypoints.

    `waypoints` holds the M-1 interior waypoints (may be empty for a single
    piece); `times` the M piece durations. Returns the trajectory and its
    smoothness cost (integral of squared jerk summed over axes).
    """
    times = np.asarray(times, dtype=float).ravel()
    waypoints = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    m = len(times)
    if len(waypoints) != m - 1:
        raise ValueError("need exactly len(times) - 1 interior waypoints")
    if np.any(times <= 0):
        raise ValueError("piece durations must be positive")

    A = _spline_system(times)
    rhs = np.zeros((6 * m, 3))
    rhs[0] = start.p
    rhs[1] = start.v
    rhs[2] = start.a
    rhs[3] = end.p
    rhs[4] = end.v
    rhs[5] = end.a
    row = 6
    for i in range(m - 1):
        rhs[row] = waypoints[i]
        rhs[row + 1] = waypoints[i]
        row += 6
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular spline system (degenerate durations)") from exc
    coeffs = sol.reshape(m, 6, 3).transpose(0, 2, 1)
    traj = PiecewiseTrajectory(coeffs=coeffs, durations=times)
    return traj, smoothness_cost(traj)


def smoothness_cost(traj: PiecewiseTrajectory) -> float:
    """Integral of squared jerk over the trajectory, summed over axes."""
    total = 0.0
    for i in range(traj.n_pieces):
        T = traj.durations[i]
        c = traj.coeffs[i]  # (3, 6)
        a = np.column_stack([6 * c[:, 3], 24 * c[:, 4], 60 * c[:, 5]])  # (3, 3)
        total += float(np.einsum("xi,ij,xj->", a, _MONO_GRAM3, a)) / T**5
    return total


def _hinge_cubed(x: float) -> float:
    return max(x, 0.0) ** 3


def _barrier(q: np.ndarray, cube: Cube, kappa: float) -> float:
    slack = np.concatenate([cube.hi - q, q - cube.lo])
    if np.any(slack <= 0):
        return math.inf
    return -kappa * float(np.log(slack).sum())


def total_cost(
    q_w: np.ndarray,
    times: np.ndarray,
    corridor: Corridor,
    cfg: BackendConfig,
    start: BoundaryState,
    end: BoundaryState,
    assignment: np.ndarray | None = None,
) -> float:
    """Smoothness + barrier + aggressiveness cost of a candidate solution.

    Returns +inf outside the barrier/duration domain (waypoint on or past a
    cube face, or a piece duration under the floor); the line search treats
    that as a rejected step.
    """
    times = np.asarray(times, dtype=float).ravel()
    q_w = np.asarray(q_w, dtype=float).reshape(-1, 3)
    m = len(times)
    if assignment is None:
        assignment = np.arange(m)
    if np.any(times < _T_FLOOR):
        return math.inf

    j_f = 0.0
    for i in range(1, m):
        for cube_idx in (assignment[i - 1], assignment[i]):
            j_f += _barrier(q_w[i - 1], corridor.cubes[cube_idx], cfg.kappa)
            if math.isinf(j_f):
                return math.inf

    anchors = np.vstack([start.p[None, :], q_w, end.p[None, :]])
    j_d = cfg.rho_t * float(times.sum())
    for i in range(1, m):
        dv = anchors[i + 1] - anchors[i - 1]
        j_d += cfg.rho_v * _hinge_cubed(float(dv @ dv) / (times[i] + times[i - 1]) ** 2 - cfg.v_m**2)
        da = (anchors[i + 1] - anchors[i]) / times[i] - (anchors[i] - anchors[i - 1]) / times[i - 1]
        da = da / ((times[i] + times[i - 1]) / 2.0)
        j_d += cfg.rho_a * _hinge_cubed(float(da @ da) - cfg.a_m**2)

    _, j_s = min_jerk(q_w, times, start, end)
    return j_s + j_f + j_d


def _central_gradient(fun, z: np.ndarray, rel_step: float) -> np.ndarray:
    g = np.zeros_like(z)
    for i in range(len(z)):
        h = rel_step * max(1.0, abs(z[i]))
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        fp, fm = fun(zp), fun(zm)
        if math.isinf(fp) or math.isinf(fm):
            h *= 0.01
            zp[i] = z[i] + h
            zm[i] = z[i] - h
            fp, fm = fun(zp), fun(zm)
        g[i] = (fp - fm) / (2 * h)
    return g


def _descend(
    q0: np.ndarray,
    times0: np.ndarray,
    assignment: np.ndarray,
    corridor: Corridor,
    cfg: BackendConfig,
    start: BoundaryState,
    end: BoundaryState,
) -> tuple[np.ndarray, np.ndarray, list[float], bool]:
    """BFGS with backtracking on (waypoints, log-durations)."""
    m = len(times0)
    nq = 3 * (m - 1)

    def unpack(z):
        return z[:nq].reshape(-1, 3), np.exp(z[nq:])

    def cost(z):
        q, times = unpack(z)
        return total_cost(q, times, corridor, cfg, start, end, assignment)

    z = np.concatenate([np.asarray(q0, dtype=float).ravel(), np.log(times0)])
    f = cost(z)
    if math.isinf(f):
        return q0, times0, [f], True
    trace = [f]
    H = np.eye(len(z))
    g = _central_gradient(cost, z, cfg.fd_step)
    degraded = False
    for _ in range(cfg.max_outer_iter):
        if np.abs(g).max() <= cfg.grad_tol:
            break
        d = -H @ g
        if d @ g > 0:  # reset a corrupted approximation
            H = np.eye(len(z))
            d = -g
        alpha, accepted = 1.0, False
        gd = g @ d
        while alpha > 1e-12:
            z_new = z + alpha * d
            f_new = cost(z_new)
            if f_new <= f + 1e-4 * alpha * gd and not math.isinf(f_new):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            degraded = np.abs(g).max() > 10 * cfg.grad_tol
            break
        g_new = _central_gradient(cost, z_new, cfg.fd_step)
        s = z_new - z
        y = g_new - g
        sy = s @ y
        if sy > 1e-12:
            rho = 1.0 / sy
            I = np.eye(len(z))
            H = (I - rho * np.outer(s, y)) @ H @ (I - rho * np.outer(y, s)) + rho * np.outer(s, s)
        z, f, g = z_new, f_new, g_new
        trace.append(f)
    q, times = unpack(z)
    return q, times, trace, degraded


def _trapezoid_time(dist: float, v_peak: float, a_m: float) -> float:
    if dist <= 1e-9:
        return 0.2
    if dist >= v_peak**2 / a_m:
        return dist / v_peak + v_peak / a_m
    return 2.0 * math.sqrt(dist / a_m)


def _initial_guess(corridor: Corridor, cfg: BackendConfig, start: BoundaryState, end: BoundaryState):
    m = len(corridor.cubes)
    q0 = []
    for i in range(m - 1):
        inter = corridor.cubes[i].intersection(corridor.cubes[i + 1])
        if inter is None:
            raise ValueError("corridor cubes must overlap")
        q0.append(inter.center)
    q0 = np.array(q0).reshape(-1, 3)
    anchors = np.vstack([start.p[None, :], q0, end.p[None, :]])
    lengths = np.linalg.norm(np.diff(anchors, axis=0), axis=1)
    times0 = np.array([_trapezoid_time(d, 0.7 * cfg.v_m, cfg.a_m) for d in lengths])
    times0 = np.maximum(times0, 0.15)
    return q0, times0


def optimize(
    seed_path,
    corridor: Corridor,
    cfg: BackendConfig,
    start: BoundaryState,
    end: BoundaryState,
) -> PiecewiseTrajectory:
    """Joint waypoint/duration optimization inside the corridor.

    Waypoints start at consecutive-cube intersection centers and durations
    from a trapezoidal speed heuristic at 0.7 v_m; `seed_path` (the
    front-end result) only anchors the boundary, which the caller passes
    explicitly. The returned trajectory carries the optimization trace in
    `meta` and a `degraded` flag on line-search failure.
    """
    del seed_path  # boundary conditions carry everything the backend needs
    assignment = np.arange(len(corridor.cubes))
    q0, times0 = _initial_guess(corridor, cfg, start, end)
    q, times, trace, degraded = _descend(q0, times0, assignment, corridor, cfg, start, end)
    traj, _ = min_jerk(q, times, start, end)
    traj.cube_assignment = assignment
    traj.degraded = degraded
    traj.meta = {"cost_trace": trace, "waypoints": q, "start": start, "end": end}
    return traj


def _violations(traj: PiecewiseTrajectory, corridor: Corridor, cfg: BackendConfig, samples: int = 50):
    """Indices of pieces whose samples exit their cube or break the bounds by >1%."""
    bad = []
    edges = np.concatenate([[0.0], np.cumsum(traj.durations)])
    for i in range(traj.n_pieces):
        ts = np.linspace(edges[i], edges[i + 1], samples)
        p = traj.eval(ts)
        v = traj.eval(ts, 1)
        a = traj.eval(ts, 2)
        cube = corridor.cubes[traj.cube_assignment[i]]
        tol = 0.01
        if not cube.contains_many(p).all():
            bad.append(i)
            continue
        if np.abs(v).max() > cfg.v_m * (1 + tol) or np.abs(a).max() > cfg.a_m * (1 + tol):
            bad.append(i)
    return bad


def split_and_refine(
    traj: PiecewiseTrajectory, corridor: Corridor, cfg: BackendConfig
) -> PiecewiseTrajectory:
    """Insert midpoint waypoints into violating pieces and re-optimize.

    Any piece whose dense samples leave the assigned cube or exceed the
    dynamic bounds by more than 1% is split at its midpoint time, the new
    waypoint constrained to the same cube. Up to max_splits rounds; output
    carries feasible=False when violations persist.
    """
    if traj.cube_assignment is None:
        raise ValueError("trajectory must carry a cube assignment")
    start = traj.meta.get("start") or traj.start_state()
    end = traj.meta.get("end") or traj.end_state()
    current = traj
    q = np.asarray(traj.meta["waypoints"], dtype=float).reshape(-1, 3)
    times = current.durations.copy()
    assignment = current.cube_assignment.copy()

    for _ in range(cfg.max_splits):
        bad = _violations(current, corridor, cfg)
        if not bad:
            current.feasible = True
            return current
        i = bad[0]
        cube = corridor.cubes[assignment[i]]
        edges = np.concatenate([[0.0], np.cumsum(times)])
        t_mid = edges[i] + 0.5 * times[i]
        p_mid = current.eval(t_mid)
        margin = np.minimum(0.05, (cube.hi - cube.lo) / 10.0)
        p_mid = np.clip(p_mid, cube.lo + margin, cube.hi - margin)
        q = np.insert(q, i, p_mid, axis=0)
        times = np.concatenate([times[:i], [times[i] / 2, times[i] / 2], times[i + 1 :]])
        assignment = np.insert(assignment, i, assignment[i])
        q, times, trace, degraded = _descend(q, times, assignment, corridor, cfg, start, end)
        current, _ = min_jerk(q, times, start, end)
        current.cube_assignment = assignment
        current.degraded = degraded
        current.meta = {"cost_trace": trace, "waypoints": q, "start": start, "end": end}

    # residual dynamic-bound violations: stretch the time allocation with
    # the geometry fixed until the bounds hold (the cubed-hinge surrogate
    # is too soft to pin a tight bound on its own)
    for _ in range(40):
        bad = _violations(current, corridor, cfg)
        if not bad:
            current.feasible = True
            return current
        edges = np.concatenate([[0.0], np.cumsum(times)])
        contained = all(
            corridor.cubes[assignment[i]]
            .contains_many(current.eval(np.linspace(edges[i], edges[i + 1], 50)))
            .all()
            for i in bad
        )
        if not contained:
            break
        times = times * 1.15
        current, _ = min_jerk(q, times, start, end)
        current.cube_assignment = assignment
        current.meta = {"cost_trace": [], "waypoints": q, "start": start, "end": end}

    current.feasible = not _violations(current, corridor, cfg)
    return current


def save_trajectory_csv(path, traj: PiecewiseTrajectory, rate: float = 100.0) -> None:
    """Dump t, position, velocity, acceleration rows at a fixed sample rate."""
    ts = np.arange(0.0, traj.total_duration, 1.0 / rate)
    ts = np.append(ts, traj.total_duration)
    p = traj.eval(ts)
    v = traj.eval(ts, 1)
    a = traj.eval(ts, 2)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az"])
        for i, t in enumerate(ts):
            writer.writerow(
                [f"{t:.6f}"]
                + [f"{x:.9f}" for x in p[i]]
                + [f"{x:.9f}" for x in v[i]]
                + [f"{x:.9f}" for x in a[i]]
            )

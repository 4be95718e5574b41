"""Target motion prediction by weighted, constrained Bernstein regression.

A FIFO of timestamped target observations is fit with a degree-n curve
over [t_oldest, t_newest + horizon]; the segment past t_newest is the
prediction. Older observations get smaller tanh-shaped weights, a
second-derivative regularizer damps extrapolation, and per-axis velocity
and acceleration bounds on the control-point differences keep the
predicted motion dynamically plausible. A uniform-weight, unconstrained
variant of the same regression serves as the comparison baseline.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from aerotrack import qp
from aerotrack.bezier import BezierCurve, accel_gram, bernstein_basis


@dataclass
class Observation:
    p: np.ndarray
    t: float

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.t = float(self.t)


class ObservationQueue:
    """Bounded FIFO of observations with strictly increasing timestamps."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._times: list[float] = []
        self._points: list[np.ndarray] = []

    def push(self, obs: Observation) -> None:
        if self._times and obs.t <= self._times[-1]:
            raise ValueError("timestamps must strictly increase")
        self._times.append(obs.t)
        self._points.append(obs.p)
        if len(self._times) > self.capacity:
            self._times.pop(0)
            self._points.pop(0)

    def __len__(self) -> int:
        return len(self._times)

    @property
    def t_newest(self) -> float:
        return self._times[-1]

    @property
    def t_oldest(self) -> float:
        return self._times[0]

    def times(self) -> np.ndarray:
        return np.array(self._times)

    def positions(self) -> np.ndarray:
        return np.array(self._points).reshape(-1, 3)

    def newest(self) -> Observation:
        return Observation(self._points[-1], self._times[-1])

    def snapshot(self) -> "ObservationQueue":
        q = ObservationQueue(self.capacity)
        q._times = list(self._times)
        q._points = [p.copy() for p in self._points]
        return q


@dataclass
class PredictorConfig:
    n: int = 5
    L: int = 30
    horizon: float = 2.5
    w_p: float = 15.0
    k_t: float = 1.0
    v_mp: float = 4.0
    a_mp: float = 4.0

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError("degree must be >= 3 for meaningful acceleration bounds")
        for name in ("L", "horizon", "w_p", "k_t", "v_mp", "a_mp"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def weight(t_i: float, t_L: float, k_t: float) -> float:
    """Observation confidence: 1 for the newest sample, tanh(k_t/age) before."""
    if t_i > t_L:
        raise ValueError("observation cannot be newer than the queue head")
    if t_i == t_L:
        return 1.0
    return math.tanh(k_t / (t_L - t_i))


def _weights(times: np.ndarray, t_L: float, k_t: float) -> np.ndarray:
    out = np.ones(len(times))
    older = times < t_L
    out[older] = np.tanh(k_t / (t_L - times[older]))
    return out


def _constraint_rows(n: int, s_t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-axis velocity/acceleration bound rows on control-point differences."""
    vel = np.zeros((n, n + 1))
    for i in range(n):
        vel[i, i] = -1.0
        vel[i, i + 1] = 1.0
    vel *= n / s_t
    acc = np.zeros((n - 1, n + 1))
    for i in range(n - 1):
        acc[i, i] = 1.0
        acc[i, i + 1] = -2.0
        acc[i, i + 2] = 1.0
    acc *= n * (n - 1) / s_t**2
    return vel, acc, np.vstack([vel, acc])


def assemble(queue: ObservationQueue, cfg: PredictorConfig) -> qp.QpProblem:
    """Build the weighted, regularized, bounded regression as a QP.

    Variables are the 3(n+1) control-point coordinates of a curve on
    [t_oldest, t_newest + horizon], ordered x-block, y-block, z-block.
    """
    m = len(queue)
    if m < cfg.n + 1:
        raise ValueError("not enough observations for the regression degree")
    times = queue.times()
    points = queue.positions()
    t_1, t_L = times[0], times[-1]
    if t_L == t_1:
        raise ValueError("degenerate observation time span")
    t_p = t_L + cfg.horizon
    s_t = t_p - t_1

    u = (times - t_1) / s_t
    phi = bernstein_basis(cfg.n, u)
    w = _weights(times, t_L, cfg.k_t)
    gram = accel_gram(cfg.n, s_t, 0.0, s_t)
    h_axis = 2.0 * (phi.T @ (w[:, None] * phi) + cfg.w_p * m * gram)

    nv = cfg.n + 1
    H = np.zeros((3 * nv, 3 * nv))
    g = np.zeros(3 * nv)
    for ax in range(3):
        sl = slice(ax * nv, (ax + 1) * nv)
        H[sl, sl] = h_axis
        g[ax * nv : (ax + 1) * nv] = -2.0 * phi.T @ (w * points[:, ax])

    _, _, rows_axis = _constraint_rows(cfg.n, s_t)
    n_rows = rows_axis.shape[0]
    A = np.zeros((3 * n_rows, 3 * nv))
    lo = np.zeros(3 * n_rows)
    hi = np.zeros(3 * n_rows)
    bound_lo = np.concatenate([np.full(cfg.n, -cfg.v_mp), np.full(cfg.n - 1, -cfg.a_mp)])
    bound_hi = -bound_lo
    for ax in range(3):
        A[ax * n_rows : (ax + 1) * n_rows, ax * nv : (ax + 1) * nv] = rows_axis
        lo[ax * n_rows : (ax + 1) * n_rows] = bound_lo
        hi[ax * n_rows : (ax + 1) * n_rows] = bound_hi
    return qp.QpProblem(H, g, A, lo, hi)


def _fit(queue: ObservationQueue, cfg: PredictorConfig, constrained: bool) -> BezierCurve:
    if len(queue) == 0:
        raise ValueError("empty observation queue")
    if len(queue) < cfg.n + 1:
        # cold start: hold the newest observation
        cp = np.tile(queue.newest().p, (cfg.n + 1, 1))
        return BezierCurve(cp, queue.t_oldest, queue.t_newest + cfg.horizon)
    prob = assemble(queue, cfg)
    if not constrained:
        m = len(queue)
        times = queue.times()
        points = queue.positions()
        t_1, t_L = times[0], times[-1]
        s_t = t_L + cfg.horizon - t_1
        u = (times - t_1) / s_t
        phi = bernstein_basis(cfg.n, u)
        gram = accel_gram(cfg.n, s_t, 0.0, s_t)
        h_axis = 2.0 * (phi.T @ phi + cfg.w_p * m * gram)
        nv = cfg.n + 1
        H = np.zeros((3 * nv, 3 * nv))
        g = np.zeros(3 * nv)
        for ax in range(3):
            H[ax * nv : (ax + 1) * nv, ax * nv : (ax + 1) * nv] = h_axis
            g[ax * nv : (ax + 1) * nv] = -2.0 * phi.T @ points[:, ax]
        prob = qp.QpProblem(H, g, np.zeros((0, 3 * nv)), [], [])
    sol = qp.solve(prob)
    if sol.status != "optimal":
        raise RuntimeError(f"regression QP did not solve: {sol.status}")
    nv = cfg.n + 1
    cp = np.column_stack([sol.x[ax * nv : (ax + 1) * nv] for ax in range(3)])
    t_1 = queue.t_oldest
    return BezierCurve(cp, t_1, queue.t_newest + cfg.horizon)


def predict(queue: ObservationQueue, cfg: PredictorConfig) -> BezierCurve:
    """Weighted, velocity/acceleration-bounded prediction curve."""
    return _fit(queue, cfg, constrained=True)


def baseline_fit(queue: ObservationQueue, cfg: PredictorConfig) -> BezierCurve:
    """Comparison method: uniform weights, no dynamic bounds, same regularizer."""
    return _fit(queue, cfg, constrained=False)


PREDICTION_ERROR_STEP = 0.05
PREDICTION_ERROR_SAMPLES = 50


def prediction_error(
    pred: BezierCurve,
    truth_times: np.ndarray,
    truth_positions: np.ndarray,
    t_0: float,
    t_s: float = PREDICTION_ERROR_STEP,
    samples: int = PREDICTION_ERROR_SAMPLES,
) -> float:
    """Mean distance between prediction and truth over the lookahead window.

    Averages |pred(t_0 + i*t_s) - truth(t_0 + i*t_s)| for i = 1..samples;
    the truth track is linearly interpolated and must cover the window.
    """
    truth_times = np.asarray(truth_times, dtype=float)
    truth_positions = np.asarray(truth_positions, dtype=float)
    ts = t_0 + t_s * np.arange(1, samples + 1)
    if truth_times[0] > ts[0] + 1e-9 or truth_times[-1] < ts[-1] - 1e-9:
        raise ValueError("truth track does not cover the error window")
    truth = np.column_stack([np.interp(ts, truth_times, truth_positions[:, ax]) for ax in range(3)])
    ts_clamped = np.clip(ts, pred.t_start, pred.t_end)
    errs = np.linalg.norm(pred.eval(ts_clamped) - truth, axis=1)
    return float(errs.mean())


def save_observations_csv(path, observations) -> None:
    """Replay file: one `t,x,y,z` row per observation."""
    if isinstance(observations, ObservationQueue):
        rows = zip(observations.times(), observations.positions())
    else:
        rows = ((o.t, o.p) for o in observations)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "z"])
        for t, p in rows:
            writer.writerow([repr(float(t)), repr(float(p[0])), repr(float(p[1])), repr(float(p[2]))])


def load_observations_csv(path) -> list[Observation]:
    out = []
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["t", "x", "y", "z"]:
            raise ValueError("expected a t,x,y,z observation file")
        for row in reader:
            out.append(Observation(np.array([float(row[1]), float(row[2]), float(row[3])]), float(row[0])))
    return out

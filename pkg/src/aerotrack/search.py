"""Target-informed kinodynamic A* over constant-acceleration motion primitives.

Nodes carry a double-integrator state plus the accumulated expansion time
tau, which is kept synchronized with the target prediction so the goal
propagates forward as the search looks further into the future. Edge costs
charge control energy plus time; the heuristic is the closed-form
energy-time connection cost to a goal blended between the target's current
and predicted states, minus a time credit that biases the search toward
near-term nodes. A successful direct connection (collision-free, bounded
velocity/acceleration) terminates the search early.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from aerotrack import obvp
from aerotrack.bezier import BezierCurve
from aerotrack.obvp import KinoState, ObvpSolution
from aerotrack.world import VoxelWorld


@dataclass
class SearchConfig:
    a_mt: float = 3.0  # control bound per axis, m/s^2
    n_a: int = 2  # input discretization count per side
    n_t: int = 2  # duration discretization count
    dT_max: float = 0.8  # longest primitive duration, s
    rho: float = 1.0  # time weight in the energy-time cost
    K_t: float = 2.0  # time-penalty weight in the heuristic
    S_t: float = 2.5  # expected total expansion time, s
    phi: float = 0.7  # goal blend: 0 = current target state, 1 = predicted
    v_max_search: float = 3.9  # node pruning bound per axis, m/s
    pos_tolerance: float = 0.4  # reach test radius, m
    max_expansions: int = 30000
    vel_bin: float = 0.5  # duplicate-detection velocity cell, m/s

    def __post_init__(self) -> None:
        if self.n_a < 1 or self.n_t < 1:
            raise ValueError("n_a and n_t must be at least 1")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError("phi must lie in [0, 1]")
        for name in ("a_mt", "dT_max", "rho", "K_t", "S_t", "v_max_search", "pos_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def input_set(self) -> np.ndarray:
        axis = np.linspace(-self.a_mt, self.a_mt, 2 * self.n_a + 1)
        return np.array(list(itertools.product(axis, axis, axis)))

    def durations(self) -> np.ndarray:
        return self.dT_max * np.arange(1, self.n_t + 1) / self.n_t


@dataclass
class SearchNode:
    state: KinoState
    tau: float
    g: float
    f: float = np.inf
    parent: "SearchNode | None" = None
    u: np.ndarray | None = None  # input applied from the parent
    dT: float = 0.0

    def chain(self) -> list["SearchNode"]:
        out = [self]
        while out[-1].parent is not None:
            out.append(out[-1].parent)
        return out[::-1]


@dataclass
class SearchResult:
    success: bool
    termination: str  # reach | analytic | exhausted | max_expansions
    nodes: list[SearchNode]
    tail: ObvpSolution | None
    path_points: np.ndarray
    goal: KinoState
    expansions: int
    trace: list[dict] = field(default_factory=list)

    @property
    def end_state(self) -> KinoState:
        if self.tail is not None:
            p, v, _ = obvp.sample(self.tail, self.tail.T_star)
            return KinoState(p, v)
        return self.nodes[-1].state


def edge_cost(u: np.ndarray, dT: float, rho: float) -> float:
    """Energy-time cost of one constant-input primitive."""
    if dT <= 0:
        raise ValueError("duration must be positive")
    u = np.asarray(u, dtype=float)
    return float((u @ u + rho) * dT)


def goal_state(tau: float, pred: BezierCurve, cfg: SearchConfig) -> KinoState:
    """Blend of the target's newest state and its prediction at time tau.

    The expansion clock is aligned with the last S_t seconds of the
    prediction curve, so tau = 0 corresponds to the newest observation.
    """
    t_track = max(pred.t_end - cfg.S_t, pred.t_start)
    t_prop = float(np.clip(t_track + max(tau, 0.0), pred.t_start, pred.t_end))
    p_tc = pred.eval(t_track)
    v_tc = pred.eval(t_track, order=1)
    p_tp = pred.eval(t_prop)
    v_tp = pred.eval(t_prop, order=1)
    return KinoState(
        (1.0 - cfg.phi) * p_tc + cfg.phi * p_tp,
        (1.0 - cfg.phi) * v_tc + cfg.phi * v_tp,
    )


def heuristic(node: SearchNode, goal: KinoState, cfg: SearchConfig) -> float:
    """Energy-time connection cost plus the (possibly negative) time credit."""
    d = obvp.solve(node.state, goal, cfg.rho).cost
    return d + cfg.K_t * (cfg.S_t - node.tau)


def _propagate(p: np.ndarray, v: np.ndarray, inputs: np.ndarray, dT: float):
    p_next = p[None, :] + v[None, :] * dT + 0.5 * inputs * dT * dT
    v_next = v[None, :] + inputs * dT
    return p_next, v_next


def _primitive_free(world: VoxelWorld, p, v, inputs, dT: float) -> np.ndarray:
    """Collision mask for a batch of primitives, sampled at <= half resolution."""
    speed = np.abs(v).max() + np.abs(inputs).max() * dT
    n_samples = int(np.ceil(speed * dT / (0.5 * world.resolution))) + 2
    n_samples = min(max(n_samples, 2), 400)
    ts = np.linspace(0.0, dT, n_samples)
    pts = (
        p[None, None, :]
        + v[None, None, :] * ts[None, :, None]
        + 0.5 * inputs[:, None, :] * (ts[None, :, None] ** 2)
    )
    flat = pts.reshape(-1, 3)
    ok = world.free_mask(flat, use_known=True, inflate=True)
    return ok.reshape(len(inputs), n_samples).all(axis=1)


def expand(node: SearchNode, cfg: SearchConfig, world: VoxelWorld) -> list[SearchNode]:
    """All feasible children of a node over the discretized input/duration set."""
    out: list[SearchNode] = []
    inputs = cfg.input_set()
    for dT in cfg.durations():
        p_next, v_next = _propagate(node.state.p, node.state.v, inputs, dT)
        ok = np.all(np.abs(v_next) <= cfg.v_max_search, axis=1)
        ok &= _primitive_free(world, node.state.p, node.state.v, inputs, dT)
        for idx in np.nonzero(ok)[0]:
            u = inputs[idx]
            out.append(
                SearchNode(
                    state=KinoState(p_next[idx], v_next[idx]),
                    tau=node.tau + dT,
                    g=node.g + edge_cost(u, dT, cfg.rho),
                    parent=node,
                    u=u,
                    dT=dT,
                )
            )
    return out


def analytic_expand(
    node: SearchNode, goal: KinoState, cfg: SearchConfig, world: VoxelWorld
) -> ObvpSolution | None:
    """Direct connection to the goal, accepted only if safe and within bounds."""
    sol = obvp.solve(node.state, goal, cfg.rho)
    speed = max(np.abs(node.state.v).max(), np.abs(goal.v).max(), 1.0)
    n_samples = int(np.ceil(speed * sol.T_star / (0.5 * world.resolution))) + 2
    n_samples = min(max(n_samples, 8), 400)
    ts = np.linspace(0.0, sol.T_star, n_samples)
    p, v, a = obvp.sample(sol, ts)
    if not world.free_mask(p, use_known=True, inflate=True).all():
        return None
    if np.abs(v).max() > cfg.v_max_search + 1e-9 or np.abs(a).max() > cfg.a_mt + 1e-9:
        return None
    return sol


def _bin_key(world: VoxelWorld, cfg: SearchConfig, p: np.ndarray, v: np.ndarray) -> bytes:
    cell = np.floor((p - world.bounds_min) / world.resolution).astype(np.int64)
    vb = np.floor(v / cfg.vel_bin).astype(np.int64)
    return np.concatenate([cell, vb]).tobytes()


def _sample_edge(parent: SearchNode, child: SearchNode, spacing: float) -> np.ndarray:
    n = int(np.ceil((np.abs(parent.state.v).max() + np.abs(child.u).max() * child.dT) * child.dT / spacing)) + 2
    ts = np.linspace(0.0, child.dT, max(n, 2))
    return (
        parent.state.p[None, :]
        + parent.state.v[None, :] * ts[:, None]
        + 0.5 * child.u[None, :] * (ts[:, None] ** 2)
    )


def _dense_path(nodes: list[SearchNode], tail: ObvpSolution | None, spacing: float) -> np.ndarray:
    pts = [nodes[0].state.p[None, :]]
    for parent, child in zip(nodes, nodes[1:]):
        pts.append(_sample_edge(parent, child, spacing)[1:])
    if tail is not None:
        n = max(int(np.ceil(tail.T_star / 0.05)), 8)
        ts = np.linspace(0.0, tail.T_star, n)
        p, _, _ = obvp.sample(tail, ts)
        pts.append(p[1:] if len(pts) > 1 or len(pts[0]) > 0 else p)
    return np.vstack(pts)


def search(
    start: KinoState,
    pred: BezierCurve,
    world: VoxelWorld,
    cfg: SearchConfig,
    keep_trace: bool = False,
) -> SearchResult:
    """Best-first search from start toward the propagating blended goal.

    Terminates on reaching the goal position, on an accepted analytic
    connection, on open-list exhaustion, or at the expansion cap. Failure
    results carry the best-effort chain (closest approach to its goal).
    """
    inputs = cfg.input_set()
    durations = cfg.durations()
    spacing = 0.5 * world.resolution

    root_goal = goal_state(0.0, pred, cfg)
    root = SearchNode(state=start, tau=0.0, g=0.0)
    root.f = root.g + heuristic(root, root_goal, cfg)

    counter = itertools.count()
    open_heap: list = [(root.f, -root.g, next(counter), root)]
    open_best: dict[bytes, SearchNode] = {_bin_key(world, cfg, start.p, start.v): root}
    closed: set[bytes] = set()
    expansions = 0
    trace: list[dict] = []
    best_node, best_dist = root, float(np.linalg.norm(start.p - root_goal.p))

    def finish(success, termination, node, tail, goal):
        nodes = node.chain()
        return SearchResult(
            success=success,
            termination=termination,
            nodes=nodes,
            tail=tail,
            path_points=_dense_path(nodes, tail, spacing),
            goal=goal,
            expansions=expansions,
            trace=trace,
        )

    while open_heap:
        f_pop, _, _, node = heapq.heappop(open_heap)
        key = _bin_key(world, cfg, node.state.p, node.state.v)
        if key in closed or open_best.get(key) is not node:
            continue
        goal = goal_state(node.tau, pred, cfg)
        dist = float(np.linalg.norm(node.state.p - goal.p))
        if dist < best_dist:
            best_node, best_dist = node, dist
        if keep_trace:
            trace.append(
                {"p": node.state.p.tolist(), "v": node.state.v.tolist(), "tau": node.tau, "g": node.g, "f": node.f}
            )
        if dist <= cfg.pos_tolerance:
            return finish(True, "reach", node, None, goal)
        tail = analytic_expand(node, goal, cfg, world)
        if tail is not None:
            return finish(True, "analytic", node, tail, goal)
        closed.add(key)
        if expansions >= cfg.max_expansions:
            return finish(False, "max_expansions", best_node, None, goal)
        expansions += 1

        for dT in durations:
            p_next, v_next = _propagate(node.state.p, node.state.v, inputs, dT)
            ok = np.all(np.abs(v_next) <= cfg.v_max_search, axis=1)
            ok &= _primitive_free(world, node.state.p, node.state.v, inputs, dT)
            idxs = np.nonzero(ok)[0]
            if len(idxs) == 0:
                continue
            # duplicate filtering before the batched heuristic: closed bins
            # and open bins already holding a no-worse g are dropped early
            cells = np.floor((p_next[idxs] - world.bounds_min) / world.resolution).astype(np.int64)
            vbins = np.floor(v_next[idxs] / cfg.vel_bin).astype(np.int64)
            keys = [np.concatenate([cells[r], vbins[r]]).tobytes() for r in range(len(idxs))]
            e_costs = (np.sum(inputs[idxs] ** 2, axis=1) + cfg.rho) * dT
            keep_rows = []
            for row, ckey in enumerate(keys):
                if ckey in closed:
                    continue
                existing = open_best.get(ckey)
                if existing is not None and node.g + e_costs[row] >= existing.g:
                    continue
                keep_rows.append(row)
            if not keep_rows:
                continue
            keep = np.array(keep_rows)
            tau_child = node.tau + dT
            child_goal = goal_state(tau_child, pred, cfg)
            _, cost_arr, _ = obvp.solve_batch(
                p_next[idxs[keep]],
                v_next[idxs[keep]],
                np.tile(child_goal.p, (len(keep), 1)),
                np.tile(child_goal.v, (len(keep), 1)),
                cfg.rho,
            )
            h_time = cfg.K_t * (cfg.S_t - tau_child)
            for row_out, row in enumerate(keep_rows):
                idx = idxs[row]
                g0 = node.g + e_costs[row]
                child = SearchNode(
                    state=KinoState(p_next[idx], v_next[idx]),
                    tau=tau_child,
                    g=g0,
                    f=g0 + cost_arr[row_out] + h_time,
                    parent=node,
                    u=inputs[idx],
                    dT=dT,
                )
                open_best[keys[row]] = child
                heapq.heappush(open_heap, (child.f, -child.g, next(counter), child))

    final_goal = goal_state(best_node.tau, pred, cfg)
    return finish(False, "exhausted", best_node, None, final_goal)


def save_search_trace(result: SearchResult, path) -> None:
    """Debug dump of expanded states with their f/g values."""
    payload = {
        "termination": result.termination,
        "expansions": result.expansions,
        "expanded": result.trace,
        "path": result.path_points.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

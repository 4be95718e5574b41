"""3-D occupancy world: ground truth, incremental revelation, and queries.

Two aligned grids share one geometry: `truth` holds the full environment,
`known` holds what has been revealed to the planner (tri-state: unknown,
free, occupied). Revelation copies truth into known for every cell within
sensing range that has straight-line visibility from the sensor. Unknown
cells are treated as free by planning queries but are never revealed as
such. Inflated variants of both grids support clearance-aware queries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

UNKNOWN = -1
FREE = 0
OCCUPIED = 1

DEFAULT_RESOLUTION = 0.1
DEFAULT_INFLATION = 0.3
CYLINDER_FRACTION = 0.8
CYLINDER_RADIUS_RANGE = (0.15, 0.5)
BOX_EDGE_RANGE = (0.3, 1.0)
CLEARANCE_RADIUS = 1.0


@dataclass
class ObstacleSet:
    """Cylinders (cx, cy, r, h) and axis-aligned boxes (lo, hi) in meters."""

    cylinders: list[tuple[float, float, float, float]]
    boxes: list[tuple[np.ndarray, np.ndarray]]
    seed: int
    bounds_min: np.ndarray = field(default_factory=lambda: np.array([-10.0, -10.0, 0.0]))
    bounds_max: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 3.0]))

    def __post_init__(self) -> None:
        self.bounds_min = np.asarray(self.bounds_min, dtype=float)
        self.bounds_max = np.asarray(self.bounds_max, dtype=float)

    def __len__(self) -> int:
        return len(self.cylinders) + len(self.boxes)


def generate_random_forest(
    bounds_min,
    bounds_max,
    n_obstacles: int,
    seed: int,
    clear_discs: tuple[tuple[float, float], ...] = (),
    max_attempts_per_obstacle: int = 200,
) -> ObstacleSet:
    """Randomly deploy obstacles inside the bounds, deterministically by seed.

    Roughly 80% are full-height vertical cylinders, the rest ground boxes.
    Discs in `clear_discs` (x, y centers, 1 m radius) are kept free so
    spawn points stay usable. Raises if rejection sampling cannot place an
    obstacle within the attempt budget (over-dense request).
    """
    bounds_min = np.asarray(bounds_min, dtype=float)
    bounds_max = np.asarray(bounds_max, dtype=float)
    if n_obstacles < 0:
        raise ValueError("obstacle count must be non-negative")
    if np.any(bounds_max <= bounds_min):
        raise ValueError("degenerate bounds")
    rng = np.random.default_rng(seed)
    height = bounds_max[2] - bounds_min[2]
    cylinders: list[tuple[float, float, float, float]] = []
    boxes: list[tuple[np.ndarray, np.ndarray]] = []

    def clear_of_spawns(cx: float, cy: float, reach: float) -> bool:
        return all(
            math.hypot(cx - sx, cy - sy) > reach + CLEARANCE_RADIUS for sx, sy in clear_discs
        )

    for _ in range(n_obstacles):
        placed = False
        for _ in range(max_attempts_per_obstacle):
            if rng.uniform() < CYLINDER_FRACTION:
                r = rng.uniform(*CYLINDER_RADIUS_RANGE)
                cx = rng.uniform(bounds_min[0] + r, bounds_max[0] - r)
                cy = rng.uniform(bounds_min[1] + r, bounds_max[1] - r)
                if clear_of_spawns(cx, cy, r):
                    cylinders.append((cx, cy, r, height))
                    placed = True
                    break
            else:
                edges = rng.uniform(BOX_EDGE_RANGE[0], BOX_EDGE_RANGE[1], size=3)
                cx = rng.uniform(bounds_min[0] + edges[0] / 2, bounds_max[0] - edges[0] / 2)
                cy = rng.uniform(bounds_min[1] + edges[1] / 2, bounds_max[1] - edges[1] / 2)
                lo = np.array([cx - edges[0] / 2, cy - edges[1] / 2, bounds_min[2]])
                hi = np.array([cx + edges[0] / 2, cy + edges[1] / 2, bounds_min[2] + edges[2]])
                if clear_of_spawns(cx, cy, float(np.hypot(edges[0], edges[1]) / 2)):
                    boxes.append((lo, hi))
                    placed = True
                    break
        if not placed:
            raise RuntimeError("could not place obstacle: request too dense for the bounds")
    return ObstacleSet(cylinders, boxes, seed, bounds_min, bounds_max)


@njit(cache=True)
def _segment_blocked(truth, gx0, gy0, gz0, gx1, gy1, gz1, skip_first, skip_last):
    """Exact voxel traversal: does the segment cross an occupied cell?

    Coordinates are in grid units (one cell = unit cube). Optionally skips
    the origin and/or destination cell in the occupancy test.
    """
    nx, ny, nz = truth.shape
    dx = gx1 - gx0
    dy = gy1 - gy0
    dz = gz1 - gz0
    seg = math.sqrt(dx * dx + dy * dy + dz * dz)
    if seg > 0.0:
        # nudge off exact cell boundaries to avoid traversal ambiguity
        eps = 1e-9
        gx0 += dx / seg * eps
        gy0 += dy / seg * eps
        gz0 += dz / seg * eps
    ix = min(max(int(math.floor(gx0)), 0), nx - 1)
    iy = min(max(int(math.floor(gy0)), 0), ny - 1)
    iz = min(max(int(math.floor(gz0)), 0), nz - 1)
    lx = min(max(int(math.floor(gx1)), 0), nx - 1)
    ly = min(max(int(math.floor(gy1)), 0), ny - 1)
    lz = min(max(int(math.floor(gz1)), 0), nz - 1)

    step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
    step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
    step_z = 1 if dz > 0 else (-1 if dz < 0 else 0)
    t_max_x = ((ix + (1 if step_x > 0 else 0)) - gx0) / dx if step_x != 0 else math.inf
    t_max_y = ((iy + (1 if step_y > 0 else 0)) - gy0) / dy if step_y != 0 else math.inf
    t_max_z = ((iz + (1 if step_z > 0 else 0)) - gz0) / dz if step_z != 0 else math.inf
    t_dx = abs(1.0 / dx) if dx != 0 else math.inf
    t_dy = abs(1.0 / dy) if dy != 0 else math.inf
    t_dz = abs(1.0 / dz) if dz != 0 else math.inf

    first = True
    max_steps = nx + ny + nz + 3
    for _ in range(max_steps):
        at_dest = ix == lx and iy == ly and iz == lz
        skip = (first and skip_first) or (at_dest and skip_last)
        if not skip and truth[ix, iy, iz] == 1:
            return True
        if at_dest:
            return False
        first = False
        if t_max_x <= t_max_y and t_max_x <= t_max_z:
            ix += step_x
            t_max_x += t_dx
        elif t_max_y <= t_max_z:
            iy += step_y
            t_max_y += t_dy
        else:
            iz += step_z
            t_max_z += t_dz
        if ix < 0 or iy < 0 or iz < 0 or ix >= nx or iy >= ny or iz >= nz:
            return False
    return False


@njit(cache=True)
def _reveal_scan(truth, known, offsets, ci, cj, ck, sx, sy, sz, res, bx, by, bz, range2, new_occ):
    """Copy truth into known for visible in-range cells; returns new occupied cells."""
    nx, ny, nz = truth.shape
    n_occ = 0
    for t in range(offsets.shape[0]):
        i = ci + offsets[t, 0]
        j = cj + offsets[t, 1]
        k = ck + offsets[t, 2]
        if i < 0 or j < 0 or k < 0 or i >= nx or j >= ny or k >= nz:
            continue
        if known[i, j, k] != -1:
            continue
        cx = bx + (i + 0.5) * res
        cy = by + (j + 0.5) * res
        cz = bz + (k + 0.5) * res
        d2 = (cx - sx) ** 2 + (cy - sy) ** 2 + (cz - sz) ** 2
        if d2 > range2:
            continue
        if not _segment_blocked(
            truth,
            (sx - bx) / res,
            (sy - by) / res,
            (sz - bz) / res,
            (cx - bx) / res,
            (cy - by) / res,
            (cz - bz) / res,
            True,
            True,
        ):
            known[i, j, k] = truth[i, j, k]
            if truth[i, j, k] == 1:
                new_occ[n_occ, 0] = i
                new_occ[n_occ, 1] = j
                new_occ[n_occ, 2] = k
                n_occ += 1
    return n_occ


_BALL_OFFSET_CACHE: dict[int, np.ndarray] = {}


def _ball_offsets(radius_cells: int) -> np.ndarray:
    got = _BALL_OFFSET_CACHE.get(radius_cells)
    if got is None:
        r = radius_cells
        ax = np.arange(-r, r + 1)
        di, dj, dk = np.meshgrid(ax, ax, ax, indexing="ij")
        mask = di**2 + dj**2 + dk**2 <= r * r
        got = np.column_stack([di[mask], dj[mask], dk[mask]]).astype(np.int64)
        _BALL_OFFSET_CACHE[radius_cells] = got
    return got


class VoxelWorld:
    """Occupancy grids over an axis-aligned box, with inflated variants."""

    def __init__(
        self,
        resolution: float = DEFAULT_RESOLUTION,
        bounds_min=(-10.0, -10.0, 0.0),
        bounds_max=(10.0, 10.0, 3.0),
        inflation_radius: float = DEFAULT_INFLATION,
    ):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.bounds_min = np.asarray(bounds_min, dtype=float)
        self.bounds_max = np.asarray(bounds_max, dtype=float)
        if np.any(self.bounds_max <= self.bounds_min):
            raise ValueError("degenerate bounds")
        self.inflation_radius = float(inflation_radius)
        self.dims = np.ceil((self.bounds_max - self.bounds_min) / self.resolution - 1e-9).astype(int)
        self.dims = np.maximum(self.dims, 1)
        self.truth = np.zeros(tuple(self.dims), dtype=np.int8)
        self.known = np.full(tuple(self.dims), UNKNOWN, dtype=np.int8)
        self.truth_inflated = np.zeros(tuple(self.dims), dtype=bool)
        self.known_inflated = np.zeros(tuple(self.dims), dtype=bool)

    # -- geometry helpers -------------------------------------------------

    @property
    def inflation_cells(self) -> int:
        return int(math.floor(self.inflation_radius / self.resolution + 1e-9))

    def cell_index(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((pts - self.bounds_min) / self.resolution).astype(int)
        return np.clip(idx, 0, self.dims - 1)

    def cell_center(self, idx: np.ndarray) -> np.ndarray:
        return self.bounds_min + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def in_bounds(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.bounds_min) & (pts <= self.bounds_max), axis=1)

    # -- occupancy editing ------------------------------------------------

    def _dilate_into(self, grid: np.ndarray, cells: np.ndarray) -> None:
        if len(cells) == 0:
            return
        offs = _ball_offsets(self.inflation_cells)
        pts = cells[:, None, :] + offs[None, :, :]
        pts = pts.reshape(-1, 3)
        ok = np.all((pts >= 0) & (pts < self.dims), axis=1)
        pts = pts[ok]
        grid[pts[:, 0], pts[:, 1], pts[:, 2]] = True

    def _dilate_full(self, occ: np.ndarray) -> np.ndarray:
        """Whole-grid Minkowski dilation via shifted ORs (fast for dense occupancy)."""
        out = np.zeros_like(occ, dtype=bool)
        nx, ny, nz = occ.shape
        for dx, dy, dz in _ball_offsets(self.inflation_cells):
            xs = slice(max(0, dx), nx + min(0, dx))
            ys = slice(max(0, dy), ny + min(0, dy))
            zs = slice(max(0, dz), nz + min(0, dz))
            xo = slice(max(0, -dx), nx + min(0, -dx))
            yo = slice(max(0, -dy), ny + min(0, -dy))
            zo = slice(max(0, -dz), nz + min(0, -dz))
            out[xs, ys, zs] |= occ[xo, yo, zo]
        return out

    def rebuild_truth_inflation(self) -> None:
        self.truth_inflated = self._dilate_full(self.truth == OCCUPIED)

    def occupy_cells(self, cells: np.ndarray, refresh_inflation: bool = True) -> None:
        """Mark truth cells occupied, by default refreshing the truth inflation."""
        cells = np.atleast_2d(np.asarray(cells, dtype=int))
        self.truth[cells[:, 0], cells[:, 1], cells[:, 2]] = OCCUPIED
        if refresh_inflation:
            self._dilate_into(self.truth_inflated, cells)

    def occupy_box(self, lo, hi, refresh_inflation: bool = True) -> None:
        """Occupy every cell whose center lies in the closed box [lo, hi]."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        i0 = self.cell_index(lo)[0]
        i1 = self.cell_index(hi)[0]
        ii, jj, kk = np.meshgrid(
            np.arange(i0[0], i1[0] + 1),
            np.arange(i0[1], i1[1] + 1),
            np.arange(i0[2], i1[2] + 1),
            indexing="ij",
        )
        cells = np.column_stack([ii.ravel(), jj.ravel(), kk.ravel()])
        centers = self.cell_center(cells)
        inside = np.all((centers >= lo) & (centers <= hi), axis=1)
        if inside.any():
            self.occupy_cells(cells[inside], refresh_inflation)

    def occupy_cylinder(self, cx: float, cy: float, r: float, h: float, refresh_inflation: bool = True) -> None:
        """Occupy cells whose centers fall inside a ground-based cylinder."""
        lo = np.array([cx - r, cy - r, self.bounds_min[2]])
        hi = np.array([cx + r, cy + r, self.bounds_min[2] + h])
        i0 = self.cell_index(lo)[0]
        i1 = self.cell_index(hi)[0]
        ii, jj, kk = np.meshgrid(
            np.arange(i0[0], i1[0] + 1),
            np.arange(i0[1], i1[1] + 1),
            np.arange(i0[2], i1[2] + 1),
            indexing="ij",
        )
        cells = np.column_stack([ii.ravel(), jj.ravel(), kk.ravel()])
        centers = self.cell_center(cells)
        inside = (centers[:, 0] - cx) ** 2 + (centers[:, 1] - cy) ** 2 <= r * r
        inside &= (centers[:, 2] >= self.bounds_min[2]) & (centers[:, 2] <= self.bounds_min[2] + h)
        if inside.any():
            self.occupy_cells(cells[inside], refresh_inflation)

    # -- revelation ---------------------------------------------------------

    def reveal(self, sensor_pos, sensing_range: float) -> None:
        """Reveal in-range, line-visible cells by copying truth into known."""
        sensor_pos = np.asarray(sensor_pos, dtype=float)
        if not self.in_bounds(sensor_pos)[0]:
            raise ValueError("sensor position outside bounds")
        radius_cells = int(math.ceil(sensing_range / self.resolution)) + 2
        offsets = _ball_offsets(radius_cells)
        ci, cj, ck = self.cell_index(sensor_pos)[0]
        new_occ = np.empty((offsets.shape[0], 3), dtype=np.int64)
        n_occ = _reveal_scan(
            self.truth,
            self.known,
            offsets,
            int(ci),
            int(cj),
            int(ck),
            float(sensor_pos[0]),
            float(sensor_pos[1]),
            float(sensor_pos[2]),
            self.resolution,
            float(self.bounds_min[0]),
            float(self.bounds_min[1]),
            float(self.bounds_min[2]),
            float(sensing_range) ** 2,
            new_occ,
        )
        if n_occ:
            self._dilate_into(self.known_inflated, new_occ[:n_occ])
        # the sensor always knows its own cell, even at zero range
        if self.known[ci, cj, ck] == UNKNOWN:
            self.known[ci, cj, ck] = self.truth[ci, cj, ck]
            if self.truth[ci, cj, ck] == OCCUPIED:
                self._dilate_into(self.known_inflated, np.array([[ci, cj, ck]]))

    # -- queries ------------------------------------------------------------

    def free_mask(self, points: np.ndarray, use_known: bool = True, inflate: bool = True) -> np.ndarray:
        """Vectorized is_free over an (N, 3) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = self.in_bounds(pts)
        idx = self.cell_index(pts)
        if use_known:
            grid_occ = (
                self.known_inflated[idx[:, 0], idx[:, 1], idx[:, 2]]
                if inflate
                else self.known[idx[:, 0], idx[:, 1], idx[:, 2]] == OCCUPIED
            )
        else:
            grid_occ = (
                self.truth_inflated[idx[:, 0], idx[:, 1], idx[:, 2]]
                if inflate
                else self.truth[idx[:, 0], idx[:, 1], idx[:, 2]] == OCCUPIED
            )
        return ok & ~grid_occ

    def is_free(self, p, use_known: bool = True, inflate: bool = True) -> bool:
        """Out-of-bounds is not free; unknown cells are optimistically free."""
        return bool(self.free_mask(np.asarray(p, dtype=float)[None, :], use_known, inflate)[0])

    def line_of_sight(self, a, b) -> bool:
        """True iff the segment a-b crosses no truth-occupied cell."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if not (self.in_bounds(a)[0] and self.in_bounds(b)[0]):
            raise ValueError("line_of_sight endpoints must be inside bounds")
        ga = (a - self.bounds_min) / self.resolution
        gb = (b - self.bounds_min) / self.resolution
        return not _segment_blocked(
            self.truth, ga[0], ga[1], ga[2], gb[0], gb[1], gb[2], False, False
        )

    def fresh_copy(self) -> "VoxelWorld":
        """Same truth, fully unknown known-layer; for mission resets."""
        w = VoxelWorld.__new__(VoxelWorld)
        w.resolution = self.resolution
        w.bounds_min = self.bounds_min.copy()
        w.bounds_max = self.bounds_max.copy()
        w.inflation_radius = self.inflation_radius
        w.dims = self.dims.copy()
        w.truth = self.truth.copy()
        w.truth_inflated = self.truth_inflated.copy()
        w.known = np.full(tuple(self.dims), UNKNOWN, dtype=np.int8)
        w.known_inflated = np.zeros(tuple(self.dims), dtype=bool)
        return w


def rasterize(
    obstacles: ObstacleSet,
    resolution: float = DEFAULT_RESOLUTION,
    inflation_radius: float = DEFAULT_INFLATION,
) -> VoxelWorld:
    """Build a world whose truth cells are occupied iff their center is inside an obstacle."""
    world = VoxelWorld(resolution, obstacles.bounds_min, obstacles.bounds_max, inflation_radius)
    for cx, cy, r, h in obstacles.cylinders:
        world.occupy_cylinder(cx, cy, r, h, refresh_inflation=False)
    for lo, hi in obstacles.boxes:
        world.occupy_box(lo, hi, refresh_inflation=False)
    world.rebuild_truth_inflation()
    return world


# -- environment file -----------------------------------------------------


def save_environment(path, obstacles: ObstacleSet, resolution: float = DEFAULT_RESOLUTION) -> None:
    payload = {
        "resolution": resolution,
        "bounds": {"min": list(obstacles.bounds_min), "max": list(obstacles.bounds_max)},
        "seed": obstacles.seed,
        "cylinders": [
            {"cx": cx, "cy": cy, "r": r, "h": h} for cx, cy, r, h in obstacles.cylinders
        ],
        "boxes": [{"min": list(lo), "max": list(hi)} for lo, hi in obstacles.boxes],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_environment(path) -> tuple[ObstacleSet, float]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    obstacles = ObstacleSet(
        cylinders=[(c["cx"], c["cy"], c["r"], c["h"]) for c in payload["cylinders"]],
        boxes=[(np.array(b["min"]), np.array(b["max"])) for b in payload["boxes"]],
        seed=int(payload["seed"]),
        bounds_min=np.array(payload["bounds"]["min"]),
        bounds_max=np.array(payload["bounds"]["max"]),
    )
    return obstacles, float(payload["resolution"])

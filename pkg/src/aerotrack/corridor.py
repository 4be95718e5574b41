"""Safe flight corridor: overlapping axis-aligned free cubes along a path.

Cubes are grid-aligned (corners on cell boundaries) so freeness against
the known inflated occupancy is exactly checkable. Each cube is seeded on
the path and greedily inflated one cell slab at a time; the next cube is
seeded at the last path point whose whole cell fits inside the previous
cube, which guarantees consecutive cubes share interior volume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from aerotrack.world import VoxelWorld

DEFAULT_MAX_CUBE = 3.0
_EPS = 1e-9


class CorridorError(RuntimeError):
    """Corridor construction failed (single-cell pinch or coverage stall)."""


@dataclass
class Cube:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise ValueError("cube must have positive extent per axis")

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - _EPS) and np.all(p <= self.hi + _EPS))

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lo - _EPS) & (pts <= self.hi + _EPS), axis=1)

    def intersection(self, other: "Cube") -> "Cube | None":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(hi - lo <= 0):
            return None
        return Cube(lo, hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


@dataclass
class Corridor:
    cubes: list[Cube]

    def __len__(self) -> int:
        return len(self.cubes)

    def contains(self, p) -> bool:
        return any(c.contains(p) for c in self.cubes)

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.zeros(len(pts), dtype=bool)
        for c in self.cubes:
            out |= c.contains_many(pts)
        return out


_DIRS = [(0, +1), (0, -1), (1, +1), (1, -1), (2, +1), (2, -1)]


class _CellBox:
    """Inclusive cell-index box being grown inside the known-free space."""

    def __init__(self, world: VoxelWorld, seed_cell: np.ndarray, max_cube: float):
        self.world = world
        self.lo = seed_cell.copy()
        self.hi = seed_cell.copy()
        self.max_cells = max(int(round(max_cube / world.resolution)), 1)

    def _slab_blocked(self, axis: int, index: int) -> bool:
        sl = [slice(self.lo[a], self.hi[a] + 1) for a in range(3)]
        sl[axis] = slice(index, index + 1)
        return bool(self.world.known_inflated[tuple(sl)].any())

    def _box_blocked(self, lo: np.ndarray, hi: np.ndarray) -> bool:
        sl = tuple(slice(lo[a], hi[a] + 1) for a in range(3))
        return bool(self.world.known_inflated[sl].any())

    def try_grow(self, axis: int, sign: int) -> bool:
        if self.hi[axis] - self.lo[axis] + 2 > self.max_cells:
            return False
        index = self.hi[axis] + 1 if sign > 0 else self.lo[axis] - 1
        if index < 0 or index >= self.world.dims[axis]:
            return False
        if self._slab_blocked(axis, index):
            return False
        if sign > 0:
            self.hi[axis] = index
        else:
            self.lo[axis] = index
        return True

    def try_absorb(self, cell: np.ndarray, max_cells: int | None = None) -> bool:
        """Extend the box to include a cell if the enlarged box stays free."""
        cap = self.max_cells if max_cells is None else max_cells
        lo = np.minimum(self.lo, cell)
        hi = np.maximum(self.hi, cell)
        if np.any(hi - lo + 1 > cap):
            return False
        if self._box_blocked(lo, hi):
            return False
        self.lo, self.hi = lo, hi
        return True

    def to_cube(self) -> Cube:
        res = self.world.resolution
        return Cube(
            self.world.bounds_min + self.lo * res,
            self.world.bounds_min + (self.hi + 1) * res,
        )

    def cell_inside(self, cell: np.ndarray) -> bool:
        return bool(np.all(cell >= self.lo) and np.all(cell <= self.hi))


def _grow_round_robin(box: _CellBox) -> None:
    grew = True
    while grew:
        grew = False
        for axis, sign in _DIRS:
            grew |= box.try_grow(axis, sign)


def _grow_along_tangent(box: _CellBox, tangent: np.ndarray) -> None:
    order = np.argsort(-np.abs(tangent))
    for axis in order:
        sign = 1 if tangent[axis] >= 0 else -1
        while box.try_grow(axis, sign):
            pass
        while box.try_grow(axis, -sign):
            pass


def build(path_points: np.ndarray, world: VoxelWorld, max_cube: float = DEFAULT_MAX_CUBE) -> Corridor:
    """Cover a collision-free path with a chain of overlapping free cubes.

    Each cube first absorbs the run of upcoming path cells that still fits
    in one free box (guaranteeing the chain advances along the path), then
    inflates greedily for margin: the first cube evenly in all directions
    (the start may head anywhere, including backwards), later cubes along
    the local path tangent first. Raises ValueError for path points that
    are not free on the known inflated map, and CorridorError when
    consecutive overlap cannot be achieved (single-cell pinch).
    """
    path = np.atleast_2d(np.asarray(path_points, dtype=float))
    if len(path) == 0:
        raise ValueError("empty path")
    if not world.free_mask(path, use_known=True, inflate=True).all():
        raise ValueError("path points must be free on the known inflated map")

    n = len(path)
    cells = world.cell_index(path)
    cubes: list[Cube] = []
    covered_until = -1
    seed_idx = 0

    while covered_until < n - 1:
        box = _CellBox(world, cells[seed_idx].copy(), max_cube)
        # absorb upcoming path cells while they still fit in one free box;
        # the first cube keeps half its budget for backward margin
        walk_cap = box.max_cells if cubes else max(box.max_cells // 2, 1)
        k = seed_idx + 1
        while k < n and box.try_absorb(cells[k], walk_cap):
            k += 1
        if not cubes:
            _grow_round_robin(box)
        else:
            look = min(seed_idx + 20, n - 1)
            tangent = path[look] - path[seed_idx]
            if np.linalg.norm(tangent) < 1e-12:
                _grow_round_robin(box)
            else:
                _grow_along_tangent(box, tangent)
        cube = box.to_cube()

        j = covered_until + 1
        while j < n and cube.contains(path[j]):
            j += 1
        new_covered = j - 1
        if cubes and new_covered <= covered_until:
            raise CorridorError("corridor coverage stalled: pinch narrower than a cube overlap")
        cubes.append(cube)
        covered_until = max(new_covered, covered_until)
        if covered_until >= n - 1:
            break
        # next seed: last covered point whose whole cell fits in this cube
        nxt = None
        for k in range(covered_until, seed_idx - 1, -1):
            if box.cell_inside(cells[k]):
                nxt = k
                break
        if nxt is None:
            raise CorridorError("no overlap seed available: single-cell pinch")
        seed_idx = nxt
    return Corridor(cubes)


def contains(corridor: Corridor, p) -> bool:
    """Membership in the union of cubes (closed half-space tests)."""
    return corridor.contains(p)


def save_corridor(path, corridor: Corridor) -> None:
    payload = {"cubes": [{"min": list(c.lo), "max": list(c.hi)} for c in corridor.cubes]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_corridor(path) -> Corridor:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return Corridor([Cube(np.array(c["min"]), np.array(c["max"])) for c in payload["cubes"]])

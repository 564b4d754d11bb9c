"""Deterministic 2D occupancy-grid world.

Grid convention: ``occupied[iy, ix]`` with ``iy`` growing along +y, so world
point ``(x, y)`` lies in cell ``(floor(x / cell_size), floor(y / cell_size))``.
Heading 0 points along +x; positive yaw turns counter-clockwise.

Motion and candidate clearance use the occupancy grid inflated by the agent
body radius; visibility and geodesic distance use the raw grid.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np
from scipy import ndimage

from .geometry import GeometryError, PolarAction, Pose, wrap_angle

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class GridConfig:
    """Simulation constants. Defaults follow the navigation setup used for the benchmarks."""

    map_size: Optional[int] = None  # cells per side; None -> taken from the grid
    cell_size: float = 0.25
    voxel_ray_size: Optional[float] = None  # None -> derived from max_vis_range
    fov: float = math.radians(131.0)
    max_vis_range: float = 5.0
    n_candidates: int = 8
    forward_range: tuple[float, float] = (0.4, 1.5)
    rotation_bins: int = 60
    success_radius: float = 0.5
    max_steps: int = 40
    agent_radius: float = 0.17
    stride_margin: float = 0.9  # strides and collision truncation stop at this fraction of clearance
    turn_bins: int = 30  # in-place rotate cards at +/- this many bins; 30 of 60 is a single turn-around (0 disables)

    def __post_init__(self):
        lo, hi = self.forward_range
        if not 0 <= lo <= hi:
            raise ValueError(f"bad forward_range {self.forward_range}")
        if not 0 < self.fov <= 2 * math.pi + 1e-12:
            raise ValueError("fov must lie in (0, 2pi]")
        for name in ("n_candidates", "rotation_bins", "max_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.turn_bins <= self.rotation_bins // 2:
            raise ValueError("turn_bins must lie in [0, rotation_bins / 2]")
        if self.cell_size <= 0 or self.max_vis_range <= 0:
            raise ValueError("cell_size and max_vis_range must be positive")
        object.__setattr__(self, "forward_range", (float(lo), float(hi)))

    def for_grid(self, grid: "OccupancyGrid") -> "GridConfig":
        """Bind map_size and cell_size to a concrete grid."""
        return replace(self, map_size=grid.map_size, cell_size=grid.cell_size)

    @property
    def rotation_step(self) -> float:
        return 2 * math.pi / self.rotation_bins

    @property
    def inflation_cells(self) -> int:
        return math.ceil(self.agent_radius / self.cell_size - 1e-9) if self.agent_radius > 0 else 0

    def _map_size(self) -> int:
        if self.map_size is None:
            raise ValueError("map_size unset; call GridConfig.for_grid(grid) first")
        return self.map_size

    @property
    def vis_radius_cells(self) -> float:
        """Visibility radius in cells.

        With an explicit ``voxel_ray_size`` the radius is chosen so that an
        unoccluded sector covers pi * (map_size / voxel_ray_size)^2 cells.
        """
        if self.voxel_ray_size is None:
            return self.max_vis_range / self.cell_size
        return (self._map_size() / self.voxel_ray_size) * math.sqrt(2 * math.pi / self.fov)

    @property
    def effective_voxel_ray_size(self) -> float:
        if self.voxel_ray_size is not None:
            return self.voxel_ray_size
        return self._map_size() * math.sqrt(2 * math.pi / self.fov) / self.vis_radius_cells

    @property
    def open_footprint_size(self) -> float:
        """Calibrated open-space footprint, pi * (map_size / voxel_ray_size)^2 cells."""
        return math.pi * (self._map_size() / self.effective_voxel_ray_size) ** 2


class OccupancyGrid:
    """Boolean occupancy bitmap with world/cell conversions and cached derived maps."""

    def __init__(self, occupied, cell_size: float = 0.25):
        occ = np.asarray(occupied, dtype=bool)
        if occ.ndim != 2:
            raise ValueError("occupancy grid must be 2-D")
        self.occupied = occ
        self.occupied.setflags(write=False)
        self.cell_size = float(cell_size)
        self._inflated: dict[int, np.ndarray] = {}

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def map_size(self) -> int:
        return max(self.occupied.shape)

    def __eq__(self, other):
        return (
            isinstance(other, OccupancyGrid)
            and self.cell_size == other.cell_size
            and np.array_equal(self.occupied, other.occupied)
        )

    def __getstate__(self):
        return {"occupied": self.occupied, "cell_size": self.cell_size}

    def __setstate__(self, state):
        self.__init__(state["occupied"], state["cell_size"])

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return int(math.floor(x / self.cell_size)), int(math.floor(y / self.cell_size))

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.cell_size, (iy + 0.5) * self.cell_size

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def is_free(self, x: float, y: float) -> bool:
        ix, iy = self.world_to_cell(x, y)
        return self.in_bounds(ix, iy) and not self.occupied[iy, ix]

    def flat_index(self, ix: int, iy: int) -> int:
        return iy * self.width + ix

    def inflated(self, n_cells: int) -> np.ndarray:
        """Occupancy dilated by ``n_cells`` (square structuring element)."""
        if n_cells not in self._inflated:
            if n_cells <= 0:
                arr = self.occupied
            else:
                arr = ndimage.binary_dilation(
                    self.occupied, structure=np.ones((2 * n_cells + 1,) * 2, bool), border_value=1
                )
                arr.setflags(write=False)
            self._inflated[n_cells] = arr
        return self._inflated[n_cells]

    @cached_property
    def obstacle_distance(self) -> np.ndarray:
        """Euclidean distance (meters) from each cell centre to the nearest occupied cell centre."""
        d = ndimage.distance_transform_edt(~self.occupied) * self.cell_size
        d.setflags(write=False)
        return d


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: OccupancyGrid
    start: Pose
    target: tuple[float, float]
    target_category: str = "object"
    seed: int = 0
    evidence_cues: tuple[str, ...] = ()

    def __post_init__(self):
        g = self.grid
        if not g.is_free(self.start.x, self.start.y):
            raise ValueError(f"{self.name}: start not in free space")
        if not g.is_free(*self.target):
            raise ValueError(f"{self.name}: target not in free space")
        occ = g.occupied
        if not (occ[0].all() and occ[-1].all() and occ[:, 0].all() and occ[:, -1].all()):
            raise ValueError(f"{self.name}: border cells must be occupied")

    @property
    def target_cell(self) -> tuple[int, int]:
        return self.grid.world_to_cell(*self.target)


@dataclass(frozen=True)
class VisibilityFootprint:
    step: int
    cells: np.ndarray  # sorted flat cell indices (iy * width + ix)

    def __len__(self):
        return len(self.cells)

    def __contains__(self, flat_index) -> bool:
        i = np.searchsorted(self.cells, flat_index)
        return bool(i < len(self.cells) and self.cells[i] == flat_index)

    def __eq__(self, other):
        return (
            isinstance(other, VisibilityFootprint)
            and self.step == other.step
            and np.array_equal(self.cells, other.cells)
        )


class StepResult(NamedTuple):
    pose: Pose
    moved: float
    collision: bool


def ray_clearance(occupied: np.ndarray, x: float, y: float, angle: float, cell_size: float,
                  max_dist: float = math.inf) -> float:
    """Distance along ``angle`` from (x, y) to the first occupied cell (grid traversal).

    The start cell is never counted as blocking. Leaving the grid counts as a hit.
    Result is capped at ``max_dist``.
    """
    h, w = occupied.shape
    u, v = x / cell_size, y / cell_size
    ix, iy = int(math.floor(u)), int(math.floor(v))
    dx, dy = math.cos(angle), math.sin(angle)
    if abs(dx) < 1e-15:
        dx = 0.0
    if abs(dy) < 1e-15:
        dy = 0.0
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    t_delta_x = abs(1.0 / dx) if dx else math.inf
    t_delta_y = abs(1.0 / dy) if dy else math.inf
    t_max_x = ((ix + 1 - u) if dx > 0 else (u - ix)) * t_delta_x if dx else math.inf
    t_max_y = ((iy + 1 - v) if dy > 0 else (v - iy)) * t_delta_y if dy else math.inf
    limit = max_dist / cell_size
    while True:
        if t_max_x < t_max_y:
            t = t_max_x
            ix += step_x
            t_max_x += t_delta_x
        else:
            t = t_max_y
            iy += step_y
            t_max_y += t_delta_y
        if t >= limit:
            return max_dist
        if not (0 <= ix < w and 0 <= iy < h) or occupied[iy, ix]:
            return t * cell_size


def _clearance(pose: Pose, angle: float, grid: OccupancyGrid, cfg: GridConfig, max_dist: float) -> float:
    return ray_clearance(grid.inflated(cfg.inflation_cells), pose.x, pose.y, angle, grid.cell_size, max_dist)


def rotation_lattice(cfg: GridConfig) -> np.ndarray:
    """Yaw offsets from the rotation-bin lattice that fall inside the field of view."""
    k = int(math.floor((cfg.fov / 2) / cfg.rotation_step + 1e-9))
    return np.arange(-k, k + 1) * cfg.rotation_step


def generate_candidates(pose: Pose, grid: OccupancyGrid, cfg: GridConfig,
                        rng: Optional[np.random.Generator] = None) -> list[PolarAction]:
    """Geometry-pruned polar candidates, ordered by increasing yaw.

    Each lattice direction has a stride cap of min(forward max, margin x
    clearance); directions whose cap falls below the minimum forward distance
    are dropped. When more than ``n_candidates`` directions survive, an evenly
    spaced subset is kept. With ``rng`` each stride is drawn uniformly from
    [forward min, cap]; without it the cap itself is used.
    """
    lo, hi = cfg.forward_range
    margin = cfg.stride_margin
    reach = hi / margin + grid.cell_size
    survivors = []
    for theta in rotation_lattice(cfg):
        cl = _clearance(pose, pose.heading + theta, grid, cfg, reach)
        r = min(hi, margin * cl)
        if r >= lo:
            survivors.append(PolarAction(r, float(theta)))
    n = cfg.n_candidates
    if len(survivors) > n:
        idx = np.round(np.linspace(0, len(survivors) - 1, n)).astype(int)
        survivors = [survivors[i] for i in idx]
    if rng is not None and survivors:
        u = rng.random(len(survivors))
        survivors = [PolarAction(lo + ui * (a.r - lo), a.theta) for ui, a in zip(u, survivors)]
    return survivors


def rotate_actions(cfg: GridConfig) -> list[PolarAction]:
    """In-place turns left and right by ``turn_bins`` lattice steps (one card when they coincide)."""
    if cfg.turn_bins == 0:
        return []
    a = cfg.turn_bins * cfg.rotation_step
    turns = [PolarAction(0.0, a), PolarAction(0.0, -a)]
    return turns[:1] if turns[0].theta == turns[1].theta else turns


_OFFSET_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _disc_offsets(radius_cells: float) -> tuple[np.ndarray, np.ndarray]:
    key = int(math.ceil(radius_cells)) + 1
    if key not in _OFFSET_CACHE:
        r = np.arange(-key, key + 1)
        dx, dy = np.meshgrid(r, r)
        _OFFSET_CACHE[key] = (dx.ravel(), dy.ravel())
    return _OFFSET_CACHE[key]


def visible_cells(pose: Pose, grid: OccupancyGrid, cfg: GridConfig, step: int = 0,
                  fov: Optional[float] = None) -> VisibilityFootprint:
    """Cells inside the view sector that have an unobstructed line of sight from the pose.

    Only free cells count as observed. The agent's own cell is always included.
    ``fov`` overrides ``cfg.fov``.
    """
    fov = cfg.fov if fov is None else fov
    radius = cfg.vis_radius_cells
    occ = grid.occupied
    h, w = occ.shape
    u, v = pose.x / grid.cell_size, pose.y / grid.cell_size
    ax, ay = int(math.floor(u)), int(math.floor(v))

    ox, oy = _disc_offsets(radius)
    cx, cy = ax + ox, ay + oy
    inside = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    cx, cy = cx[inside], cy[inside]
    px, py = cx + 0.5 - u, cy + 0.5 - v
    dist = np.hypot(px, py)
    keep = dist <= radius
    if fov < 2 * math.pi - 1e-12:
        rel = np.arctan2(py, px) - pose.heading
        rel = (rel + math.pi) % (2 * math.pi) - math.pi
        keep &= np.abs(rel) <= fov / 2 + 1e-12
    own = (cx == ax) & (cy == ay)
    keep &= ~own & ~occ[cy, cx]
    cx, cy = cx[keep], cy[keep]

    if len(cx):
        # Canonical endpoint order makes the sight line independent of direction.
        bx, by = cx + 0.5, cy + 0.5
        swap = (bx < u) | ((bx == u) & (by < v))
        sx = np.where(swap, bx, u)
        sy = np.where(swap, by, v)
        ex = np.where(swap, u, bx)
        ey = np.where(swap, v, by)
        m = int(math.ceil(2 * radius)) + 2
        s = np.arange(1, m) / m
        # Both endpoints lie inside the grid and coordinates are non-negative,
        # so truncation is floor and no clipping is needed.
        qx = (sx[:, None] + s[None, :] * (ex - sx)[:, None]).astype(np.intp)
        qy = (sy[:, None] + s[None, :] * (ey - sy)[:, None]).astype(np.intp)
        q = qy * w + qx
        hit = occ.ravel()[q]
        endpoint = (q == (cy * w + cx)[:, None]) | (q == ay * w + ax)
        clear = ~(hit & ~endpoint).any(axis=1)
        cx, cy = cx[clear], cy[clear]

    flat = np.concatenate([cy.astype(np.int64) * w + cx, [ay * w + ax]])
    return VisibilityFootprint(step, np.unique(flat))


def local_sketch(pose: Pose, grid: OccupancyGrid, seen: np.ndarray, target: Optional[tuple[float, float]] = None,
                 radius: int = 8) -> str:
    """Egocentric ASCII map, heading up and left to the left.

    ``#`` wall, ``.`` observed free, ``?`` not yet observed, ``@`` agent,
    ``T`` target (only when ``target`` is given). ``seen`` is a flat mask.
    """
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    tcell = grid.world_to_cell(*target) if target is not None else None
    rows = []
    for fwd in range(radius, -radius - 1, -1):
        row = []
        for right in range(-radius, radius + 1):
            if fwd == 0 and right == 0:
                row.append("@")
                continue
            x = pose.x + grid.cell_size * (fwd * c + right * s)
            y = pose.y + grid.cell_size * (fwd * s - right * c)
            ix, iy = grid.world_to_cell(x, y)
            if not grid.in_bounds(ix, iy) or grid.occupied[iy, ix]:
                row.append("#")
            elif (ix, iy) == tcell:
                row.append("T")
            else:
                row.append("." if seen[grid.flat_index(ix, iy)] else "?")
        rows.append("".join(row))
    return "\n".join(rows)


def step(pose: Pose, action: PolarAction, grid: OccupancyGrid, cfg: GridConfig) -> StepResult:
    """Turn by ``action.theta`` then advance ``action.r`` along the new heading.

    A stride that would reach an obstacle is cut to ``stride_margin`` of the
    clearance and reported as a collision.
    """
    heading = wrap_angle(pose.heading + action.theta)
    if action.r <= 0.0:
        return StepResult(Pose(pose.x, pose.y, heading), 0.0, False)
    turned = Pose(pose.x, pose.y, heading)
    cl = _clearance(turned, heading, grid, cfg, action.r + grid.cell_size)
    if action.r < cl:
        moved, collision = action.r, False
    else:
        moved, collision = cfg.stride_margin * cl, True
    return StepResult(
        Pose(pose.x + moved * math.cos(heading), pose.y + moved * math.sin(heading), heading),
        moved,
        collision,
    )


def target_visible(pose: Pose, target: tuple[float, float], grid: OccupancyGrid, cfg: GridConfig,
                   footprint: Optional[VisibilityFootprint] = None) -> bool:
    fp = footprint if footprint is not None else visible_cells(pose, grid, cfg)
    ix, iy = grid.world_to_cell(*target)
    return grid.flat_index(ix, iy) in fp


def check_success(pose: Pose, target: tuple[float, float], grid: OccupancyGrid, cfg: GridConfig) -> bool:
    """Stop succeeds within the success radius and with the target cell in view."""
    if pose.distance_to(*target) > cfg.success_radius:
        return False
    return target_visible(pose, target, grid, cfg)


_MOVES = [(1, 0, False), (-1, 0, False), (0, 1, False), (0, -1, False),
          (1, 1, True), (1, -1, True), (-1, 1, True), (-1, -1, True)]


def geodesic_moves(grid: OccupancyGrid, a_cell: tuple[int, int], b_cell: tuple[int, int]) -> Optional[tuple[int, int]]:
    """(straight, diagonal) move counts of the shortest 8-connected free path, or None.

    Diagonal moves may not cut an occupied corner. Since 1 and sqrt(2) are
    incommensurable the optimal count pair is unique.
    """
    occ = grid.occupied
    h, w = occ.shape
    for ix, iy in (a_cell, b_cell):
        if not (0 <= ix < w and 0 <= iy < h) or occ[iy, ix]:
            raise GeometryError(f"cell {(ix, iy)} is not free")
    start, goal = a_cell, b_cell
    best = {start: (0.0, 0, 0)}
    heap = [(0.0, 0, 0, start)]
    done = set()
    while heap:
        d, ns, nd, cell = heapq.heappop(heap)
        if cell in done:
            continue
        if cell == goal:
            return ns, nd
        done.add(cell)
        x, y = cell
        for mx, my, diag in _MOVES:
            nx, ny = x + mx, y + my
            if not (0 <= nx < w and 0 <= ny < h) or occ[ny, nx]:
                continue
            if diag and (occ[y, nx] or occ[ny, x]):
                continue
            cs, cd = (ns, nd + 1) if diag else (ns + 1, nd)
            nd_ = cs + cd * SQRT2
            prev = best.get((nx, ny))
            if prev is None or nd_ < prev[0]:
                best[(nx, ny)] = (nd_, cs, cd)
                heapq.heappush(heap, (nd_, cs, cd, (nx, ny)))
    return None


def geodesic_distance(a: tuple[float, float], b: tuple[float, float], grid: OccupancyGrid) -> float:
    """Shortest free-space path length (meters) between the cells holding ``a`` and ``b``."""
    moves = geodesic_moves(grid, grid.world_to_cell(*a), grid.world_to_cell(*b))
    if moves is None:
        return math.inf
    straight, diagonal = moves
    return (straight + diagonal * SQRT2) * grid.cell_size

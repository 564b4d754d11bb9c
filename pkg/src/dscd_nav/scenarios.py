"""Seeded generators for crafted evaluation suites.

Three families:

``dead_end``
    A U-shaped pocket sits between start and target with its mouth facing the
    start, so the straight-line goal bearing leads into the pocket.
``junction``
    A dividing wall with two doors. The door nearer the goal bearing opens into
    a closed closet; the other door leads through to the target.
``clutter``
    An open room with a few rectangular obstacles.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Callable

import numpy as np

from .env import OccupancyGrid, Scenario
from .geometry import Pose
from .scenario_io import save_scenario

MAP_CELLS = 40
CELL_SIZE = 0.25
CATEGORIES = ("chair", "bed", "toilet", "sofa", "tv_monitor", "plant")


def _blank(n: int) -> np.ndarray:
    occ = np.zeros((n, n), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return occ


def _make(name: str, seed: int, occ: np.ndarray, start: tuple[int, int], heading: float,
          target: tuple[int, int], rng: np.random.Generator) -> Scenario:
    grid = OccupancyGrid(occ, CELL_SIZE)
    sx, sy = grid.cell_center(*start)
    return Scenario(
        name=name,
        grid=grid,
        start=Pose(sx, sy, heading),
        target=grid.cell_center(*target),
        target_category=str(rng.choice(CATEGORIES)),
        seed=seed,
    )


def _flip(occ: np.ndarray, start, target, heading, rng):
    """Random mirror/rotation so families do not all face the same way."""
    n = occ.shape[0]
    k = int(rng.integers(4))
    mirror = bool(rng.integers(2))

    def tf(cell):
        x, y = cell
        if mirror:
            x = n - 1 - x
        for _ in range(k):
            x, y = n - 1 - y, x
        return x, y

    if mirror:
        occ = occ[:, ::-1]
        heading = math.pi - heading
    occ = np.rot90(occ, k=-k).copy() if k else occ.copy()
    # np.rot90 on [iy, ix] arrays with k=-1 maps (x, y) -> (n-1-y, x) in (ix, iy) terms.
    heading = heading + k * math.pi / 2
    return occ, tf(start), tf(target), heading


def dead_end(seed: int) -> Scenario:
    rng = np.random.default_rng([1, seed])
    n = MAP_CELLS
    occ = _blank(n)
    yc = int(rng.integers(15, 25))
    half = int(rng.integers(4, 7))  # pocket half-height
    base_x = int(rng.integers(22, 27))
    depth = int(rng.integers(6, 10))
    occ[yc - half:yc + half + 1, base_x] = True
    occ[yc - half, base_x - depth:base_x + 1] = True
    occ[yc + half, base_x - depth:base_x + 1] = True
    start = (int(rng.integers(3, base_x - depth - 3)), yc + int(rng.integers(-2, 3)))
    target = (int(rng.integers(base_x + 3, n - 4)), yc + int(rng.integers(-2, 3)))
    occ, start, target, heading = _flip(occ, start, target, 0.0, rng)
    return _make(f"dead_end_{seed:03d}", seed, occ, start, heading, target, rng)


def junction(seed: int) -> Scenario:
    rng = np.random.default_rng([2, seed])
    n = MAP_CELLS
    occ = _blank(n)
    wall_x = int(rng.integers(17, 23))
    occ[1:n - 1, wall_x] = True
    # decoy door near the start row opens into a closed closet
    start_y = int(rng.integers(14, 26))
    decoy_y = start_y + int(rng.integers(-2, 3))
    true_side = 1 if rng.integers(2) else -1
    true_y = int(np.clip(start_y + true_side * int(rng.integers(10, 14)), 3, n - 4))
    occ[decoy_y - 1:decoy_y + 2, wall_x] = False
    occ[true_y - 1:true_y + 2, wall_x] = False
    cw = int(rng.integers(5, 8))
    ch = int(rng.integers(3, 5))
    occ[decoy_y - ch, wall_x:wall_x + cw + 1] = True
    occ[decoy_y + ch, wall_x:wall_x + cw + 1] = True
    occ[decoy_y - ch:decoy_y + ch + 1, wall_x + cw] = True
    start = (int(rng.integers(3, wall_x - 6)), start_y)
    target = (int(rng.integers(wall_x + cw + 3, n - 3)), decoy_y + int(rng.integers(-1, 2)))
    occ, start, target, heading = _flip(occ, start, target, 0.0, rng)
    return _make(f"junction_{seed:03d}", seed, occ, start, heading, target, rng)


def clutter(seed: int) -> Scenario:
    rng = np.random.default_rng([3, seed])
    n = MAP_CELLS
    occ = _blank(n)
    for _ in range(int(rng.integers(3, 7))):
        w, h = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        x, y = int(rng.integers(5, n - 5 - w)), int(rng.integers(5, n - 5 - h))
        occ[y:y + h, x:x + w] = True
    free = np.argwhere(~_inflate(occ, 2))
    while True:
        a, b = free[rng.integers(len(free))], free[rng.integers(len(free))]
        if np.hypot(*(a - b)) >= 18:
            break
    start, target = (int(a[1]), int(a[0])), (int(b[1]), int(b[0]))
    heading = float(rng.uniform(-math.pi, math.pi))
    return _make(f"clutter_{seed:03d}", seed, occ, start, heading, target, rng)


def _inflate(occ: np.ndarray, k: int) -> np.ndarray:
    from scipy import ndimage

    return ndimage.binary_dilation(occ, np.ones((2 * k + 1,) * 2, bool), border_value=1)


FAMILIES: dict[str, Callable[[int], Scenario]] = {"dead_end": dead_end, "junction": junction, "clutter": clutter}
DEFAULT_MIX = ("dead_end", "junction")


def generate_suite(n: int, base_seed: int = 0, mix=DEFAULT_MIX) -> list[Scenario]:
    """``n`` scenarios cycling through ``mix``; scenario i uses seed base_seed + i."""
    return [FAMILIES[mix[i % len(mix)]](base_seed + i) for i in range(n)]


def write_suite(scenarios, directory) -> list[Path]:
    return [save_scenario(s, Path(directory) / f"{s.name}.map") for s in scenarios]

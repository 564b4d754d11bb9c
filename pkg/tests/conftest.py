import math

import numpy as np
import pytest

from dscd_nav.env import GridConfig, OccupancyGrid, Scenario
from dscd_nav.geometry import Pose


def boxed(width: int, height: int) -> np.ndarray:
    """Free interior with a one-cell occupied border, indexed [iy, ix]."""
    occ = np.zeros((height, width), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return occ


def make_scenario(occ, start, target, cell_size=0.25, heading=0.0, name="fixture", seed=0) -> Scenario:
    grid = OccupancyGrid(occ, cell_size)
    sx, sy = grid.cell_center(*start)
    return Scenario(name, grid, Pose(sx, sy, heading), grid.cell_center(*target), "chair", seed)


@pytest.fixture
def open_room():
    return OccupancyGrid(boxed(80, 80), 0.25)


@pytest.fixture
def cfg():
    return GridConfig()


def deg(x: float) -> float:
    return math.radians(x)

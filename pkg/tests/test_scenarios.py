from pathlib import Path

import numpy as np
import pytest

from dscd_nav.env import GridConfig, geodesic_distance
from dscd_nav.runner import load_suite
from dscd_nav.scenario_io import format_scenario
from dscd_nav.scenarios import FAMILIES, generate_suite

PINNED = Path(__file__).parent.parent / "scenarios" / "acceptance"


def test_generator_reproduces_pinned_suite():
    files = sorted(PINNED.glob("*.map"))
    assert len(files) == 100
    generated = {s.name: format_scenario(s) for s in generate_suite(100)}
    assert {f.stem: f.read_text(encoding="utf-8") for f in files} == generated


def test_pinned_suite_mix():
    names = [s.name for s in load_suite(PINNED)]
    assert sum(n.startswith("dead_end") for n in names) == 50
    assert sum(n.startswith("junction") for n in names) == 50


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_family_scenarios_are_solvable(family):
    cfg = GridConfig()
    for seed in range(15):
        scn = FAMILIES[family](seed)
        inflated = scn.grid.inflated(cfg.for_grid(scn.grid).inflation_cells)
        ix, iy = scn.grid.world_to_cell(scn.start.x, scn.start.y)
        assert not inflated[iy, ix]
        d = geodesic_distance((scn.start.x, scn.start.y), scn.target, scn.grid)
        assert np.isfinite(d) and d > 0


def test_seeds_vary_layouts():
    texts = {format_scenario(s) for s in generate_suite(20)}
    assert len(texts) == 20

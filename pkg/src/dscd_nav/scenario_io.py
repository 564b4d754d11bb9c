"""Text scenario files.

A scenario file is a ``key: value`` header, a line holding only ``---``, then
the map, first line = top row (largest y)::

    name: dead_end_003
    seed: 3
    cell_size: 0.25
    target_category: chair
    heading_deg: 90
    evidence: bedrooms are usually off the corridor
    ---
    #######
    #S...T#
    #######

Map characters: ``#`` occupied, ``.`` free, ``S`` start, ``T`` target (both
free). Exactly one ``S`` and one ``T``; rows must all have the same length;
border cells must be ``#``. ``evidence`` may repeat; ``#`` starts a comment
only in the header.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .env import OccupancyGrid, Scenario
from .geometry import Pose

SEPARATOR = "---"
_KNOWN_KEYS = {"name", "seed", "cell_size", "target_category", "heading_deg", "evidence"}


class ScenarioFormatError(ValueError):
    pass


def parse_scenario(text: str, default_name: str = "scenario") -> Scenario:
    lines = text.split("\n")
    try:
        sep = next(i for i, ln in enumerate(lines) if ln.strip() == SEPARATOR)
    except StopIteration:
        raise ScenarioFormatError("missing '---' line between header and map") from None

    header: dict[str, str] = {}
    evidence: list[str] = []
    for lineno, raw in enumerate(lines[:sep], 1):
        ln = raw.strip()
        if not ln or ln.startswith("#"):
            continue
        if ":" not in ln:
            raise ScenarioFormatError(f"header line {lineno}: expected 'key: value', got {raw!r}")
        key, value = (s.strip() for s in ln.split(":", 1))
        if key not in _KNOWN_KEYS:
            raise ScenarioFormatError(f"header line {lineno}: unknown key {key!r}")
        if key == "evidence":
            evidence.append(value)
        else:
            header[key] = value

    rows = [ln.rstrip("\r") for ln in lines[sep + 1:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if not rows:
        raise ScenarioFormatError("empty map section")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ScenarioFormatError(f"ragged map: row {i} has {len(row)} cells, expected {width}")
        bad = set(row) - set("#.ST")
        if bad:
            raise ScenarioFormatError(f"row {i}: unknown map characters {sorted(bad)}")

    height = len(rows)
    occ = np.zeros((height, width), dtype=bool)
    start = target = None
    for r, row in enumerate(rows):
        iy = height - 1 - r
        for ix, ch in enumerate(row):
            if ch == "#":
                occ[iy, ix] = True
            elif ch == "S":
                if start is not None:
                    raise ScenarioFormatError("more than one 'S'")
                start = (ix, iy)
            elif ch == "T":
                if target is not None:
                    raise ScenarioFormatError("more than one 'T'")
                target = (ix, iy)
    if start is None or target is None:
        raise ScenarioFormatError("map needs exactly one 'S' and one 'T'")

    try:
        cell_size = float(header.get("cell_size", 0.25))
        seed = int(header.get("seed", 0))
        heading = math.radians(float(header.get("heading_deg", 0.0)))
    except ValueError as exc:
        raise ScenarioFormatError(f"bad numeric header value: {exc}") from None
    grid = OccupancyGrid(occ, cell_size)
    sx, sy = grid.cell_center(*start)
    try:
        return Scenario(
            name=header.get("name", default_name),
            grid=grid,
            start=Pose(sx, sy, heading),
            target=grid.cell_center(*target),
            target_category=header.get("target_category", "object"),
            seed=seed,
            evidence_cues=tuple(evidence),
        )
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), default_name=path.stem)


def format_scenario(scn: Scenario) -> str:
    grid = scn.grid
    sx, sy = grid.world_to_cell(scn.start.x, scn.start.y)
    tx, ty = scn.target_cell
    lines = [
        f"name: {scn.name}",
        f"seed: {scn.seed}",
        f"cell_size: {grid.cell_size!r}",
        f"target_category: {scn.target_category}",
        f"heading_deg: {round(math.degrees(scn.start.heading), 6)!r}",
    ]
    lines += [f"evidence: {e}" for e in scn.evidence_cues]
    lines.append(SEPARATOR)
    for iy in range(grid.height - 1, -1, -1):
        row = []
        for ix in range(grid.width):
            if (ix, iy) == (sx, sy):
                row.append("S")
            elif (ix, iy) == (tx, ty):
                row.append("T")
            else:
                row.append("#" if grid.occupied[iy, ix] else ".")
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


def save_scenario(scn: Scenario, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_scenario(scn), encoding="utf-8")
    return path

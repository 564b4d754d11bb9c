"""Deterministic trajectory rendering (SVG and ASCII) from a saved trace.

Legend: executed poses are dots joined by a polyline; micro-probe steps are
orange; the endpoints of alternatives that were discarded on disagreement are
red crosses; the target is a green star. ASCII uses ``o`` pose, ``p`` probe,
``x`` discarded alternative, ``@`` final position, ``S`` start, ``T`` target.
"""

from __future__ import annotations

import math
from typing import Optional

from .geometry import wrap_angle
from .runner import EpisodeTrace

PX_PER_CELL = 12


def _endpoint(pose, r: float, theta: float) -> tuple[float, float]:
    h = wrap_angle(pose.heading + theta)
    return pose.x + r * math.cos(h), pose.y + r * math.sin(h)


def discarded_alternatives(trace: EpisodeTrace) -> list[tuple[int, tuple[float, float]]]:
    """(step, endpoint) of each non-consensus alternative the agent did not follow."""
    out = []
    for rec in trace.steps:
        d = rec.decision
        if d is None or d.consensus or d.alt_id is None:
            continue
        card = next((c for c in rec.cards if c.id == d.alt_id), None)
        if card is None or card.is_stop:
            continue
        out.append((rec.step, _endpoint(rec.pose, card.action.r, card.action.theta)))
    return out


def render_ascii(trace: EpisodeTrace) -> str:
    scn = trace.scenario_object()
    grid = scn.grid
    rows = [["#" if grid.occupied[iy, ix] else "." for ix in range(grid.width)] for iy in range(grid.height)]

    def put(x: float, y: float, ch: str, over: str = ".") -> None:
        ix, iy = grid.world_to_cell(x, y)
        if grid.in_bounds(ix, iy) and rows[iy][ix] in over:
            rows[iy][ix] = ch

    for _, (x, y) in discarded_alternatives(trace):
        put(x, y, "x")
    pts = trace.path_points()
    probes = [rec.decision is not None and rec.decision.micro_probe for rec in trace.steps]
    for probe, (x, y) in zip(probes, pts):
        if not probe:
            put(x, y, "o", over=".x")
    for probe, (x, y) in zip(probes, pts):
        if probe:
            put(x, y, "p", over=".xo")
    if pts:
        put(*pts[-1], "@", over=".xop")
    put(*scn.target, "T", over=".xop@")
    put(scn.start.x, scn.start.y, "S", over=".xop@")
    return "\n".join("".join(r) for r in reversed(rows)) + "\n"


def render_svg(trace: EpisodeTrace, px: int = PX_PER_CELL) -> str:
    scn = trace.scenario_object()
    grid = scn.grid
    W, H = grid.width * px, grid.height * px
    k = px / grid.cell_size

    def sx(x: float) -> str:
        return f"{x * k:.2f}"

    def sy(y: float) -> str:
        return f"{H - y * k:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="#ffffff"/>']
    for iy in range(grid.height):
        ix = 0
        while ix < grid.width:
            if grid.occupied[iy, ix]:
                start = ix
                while ix < grid.width and grid.occupied[iy, ix]:
                    ix += 1
                out.append(f'<rect x="{start * px}" y="{H - (iy + 1) * px}" width="{(ix - start) * px}" '
                           f'height="{px}" fill="#333333"/>')
            else:
                ix += 1
    pts = trace.path_points()
    if len(pts) > 1:
        coords = " ".join(f"{sx(x)},{sy(y)}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    for rec, (x, y) in zip(trace.steps, pts):
        probe = rec.decision is not None and rec.decision.micro_probe
        color = "#ff7f0e" if probe else "#1f77b4"
        out.append(f'<circle cx="{sx(x)}" cy="{sy(y)}" r="{px / 4:.1f}" fill="{color}"/>')
    s = px / 3
    for _, (x, y) in discarded_alternatives(trace):
        cx, cy = x * k, H - y * k
        out.append(f'<path d="M{cx - s:.2f},{cy - s:.2f}L{cx + s:.2f},{cy + s:.2f}M{cx - s:.2f},{cy + s:.2f}'
                   f'L{cx + s:.2f},{cy - s:.2f}" stroke="#d62728" stroke-width="2"/>')
    tx, ty = scn.target
    out.append(f'<text x="{sx(tx)}" y="{sy(ty)}" font-size="{px * 1.5:.0f}" fill="#2ca02c" '
               f'text-anchor="middle" dominant-baseline="central">★</text>')
    out.append(f'<circle cx="{sx(scn.start.x)}" cy="{sy(scn.start.y)}" r="{px / 2.5:.1f}" fill="none" '
               f'stroke="#000000" stroke-width="2"/>')
    status = "success" if trace.outcome.success else "failure"
    out.append(f'<text x="4" y="{px}" font-size="{px}" fill="#000000">{trace.scenario}: {status}, '
               f'{trace.outcome.steps} steps</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_trajectory(trace: EpisodeTrace, px: Optional[int] = None) -> tuple[str, str]:
    return render_svg(trace, px or PX_PER_CELL), render_ascii(trace)

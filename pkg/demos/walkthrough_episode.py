"""Step-by-step narration of one episode in a dead-end scenario.

The straight line to the target runs into a U-shaped pocket. The script
prints each step's debate and decision, then replays the same scenario with
the goal-seeking stance alone to show it getting stuck.

    python3 demos/walkthrough_episode.py
"""

import math
from pathlib import Path

from dscd_nav.render import render_ascii
from dscd_nav.runner import RunConfig, apply_variant, run_episode
from dscd_nav.scenario_io import load_scenario

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "acceptance" / "dead_end_002.map"


def narrate(trace, limit=None):
    for rec in trace.steps[:limit]:
        d = rec.decision
        p = rec.pose
        print(f"step {rec.step:2d}  at ({p.x:5.2f}, {p.y:5.2f}) facing {math.degrees(p.heading):+6.1f} deg, "
              f"{len(rec.cards)} cards")
        if rec.debate is not None:
            for rnd in rec.debate.rounds:
                sib = "agrees" if rnd.sib.agrees else f"counters with {rnd.sib.candidate_id}"
                print(f"          round {rnd.k}: TSU wants {rnd.tsu.candidate_id}, SIB {sib}")
        if d is not None:
            how = "consensus" if d.consensus else f"judge picked {d.chosen_id} over {d.alt_id}"
            probe = ", micro-probe" if d.micro_probe else ""
            print(f"          -> {how}; mode {d.mode.value}{probe}; "
                  f"execute r={d.exec.r:.2f} m, turn {math.degrees(d.exec.theta):+.0f} deg")


def main():
    scn = load_scenario(SCENARIO)
    cfg = RunConfig()
    full = run_episode(cfg, scn)
    print(f"== {scn.name}, full debate ==")
    narrate(full, limit=12)
    if len(full.steps) > 12:
        print(f"... {len(full.steps) - 12} more steps")
    o = full.outcome
    print(f"outcome: {'success' if o.success else 'failure'} in {o.steps} steps, "
          f"path {o.path_length:.2f} m vs geodesic {o.geodesic:.2f} m\n")
    print(render_ascii(full))

    alone = run_episode(apply_variant(cfg, "tsu-only"), scn)
    o = alone.outcome
    print(f"== same scenario, TSU alone ==\noutcome: {'success' if o.success else 'failure'} "
          f"in {o.steps} steps, path {o.path_length:.2f} m\n")
    print(render_ascii(alone))


if __name__ == "__main__":
    main()

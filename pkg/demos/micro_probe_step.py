"""Anatomy of a micro-probe step.

When the stances still disagree after the last round and the two preferred
directions are close, the agent takes a shortened stride turned partway
toward the rejected direction. This script finds such a step and shows the
numbers behind it.

    python3 demos/micro_probe_step.py
"""

import math
from pathlib import Path

from dscd_nav.execution import ExecutionConfig
from dscd_nav.runner import RunConfig, run_episode
from dscd_nav.scenario_io import load_scenario

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "acceptance" / "junction_047.map"
INDEX = 73  # position in the pinned suite, which fixes the episode seed


def main():
    trace = run_episode(RunConfig(), load_scenario(SCENARIO), INDEX)
    ecfg = ExecutionConfig()
    probes = [r for r in trace.steps if r.decision is not None and r.decision.micro_probe]
    print(f"{trace.scenario}: {len(trace.steps)} steps, {len(probes)} micro-probes "
          f"(alpha={math.degrees(ecfg.alpha):.0f} deg, beta_r={ecfg.beta_r:.2f}, beta_theta={ecfg.beta_theta:.2f})\n")
    for rec in probes:
        d = rec.decision
        cards = {c.id: c for c in rec.cards}
        chosen, alt = cards[d.chosen_id].action, cards[d.alt_id].action
        print(f"step {rec.step}: no consensus after {len(rec.debate.rounds)} rounds")
        print(f"  judge chose {d.chosen_id}: r={chosen.r:.2f} m, turn {math.degrees(chosen.theta):+.0f} deg")
        print(f"  alternative {d.alt_id}: r={alt.r:.2f} m, turn {math.degrees(alt.theta):+.0f} deg")
        print(f"  gap {math.degrees(d.delta_theta):+.0f} deg is within alpha, so mode {d.mode.value}")
        print(f"  executed: r={d.exec.r:.2f} m (= {ecfg.beta_r:.2f} x {chosen.r:.2f}), "
              f"turn {math.degrees(d.exec.theta):+.1f} deg "
              f"(= {math.degrees(chosen.theta):+.0f} + {ecfg.beta_theta:.2f} x {math.degrees(d.delta_theta):+.0f})")
        print(f"  judge's reason: {d.why}\n")


if __name__ == "__main__":
    main()

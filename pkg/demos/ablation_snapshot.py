"""Quick ablation on a slice of the pinned suite.

Runs the full system and its single-stance and no-probe variants on the
first N scenarios and prints the metric table. The full 100-scenario run is
``dscd-nav ablate scenarios/acceptance``.

    python3 demos/ablation_snapshot.py [N]
"""

import sys
from pathlib import Path

from dscd_nav.runner import RunConfig, format_ablation, load_suite, run_ablation

SUITE = Path(__file__).resolve().parent.parent / "scenarios" / "acceptance"


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    suite = load_suite(SUITE)[:n]
    reports = run_ablation(RunConfig(), suite, ["full", "no-probe", "tsu-only", "sib-only", "rounds=1"])
    print(f"{len(suite)} scenarios")
    print(format_ablation(reports), end="")


if __name__ == "__main__":
    main()

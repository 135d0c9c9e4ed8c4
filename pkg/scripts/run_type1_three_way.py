"""Type-I error rates for the sex x age x diagnosis scenario.

Usage: python scripts/run_type1_three_way.py [--dist normal|all] [--nsim 2000] [--B 500] [--workers N]
"""

import argparse
import json
import os
from pathlib import Path

from manovaboot.cli import DIST_CHOICES, simulation_records
from manovaboot.simulation import format_report, run_scenario, three_way_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dist", default="normal", choices=sorted(DIST_CHOICES) + ["all"])
    ap.add_argument("--nsim", type=int, default=2000)
    ap.add_argument("--B", type=int, default=500)
    ap.add_argument("--seed", type=int, default=2016)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default="results/three_way.json")
    args = ap.parse_args()

    dists = DIST_CHOICES.values() if args.dist == "all" else [DIST_CHOICES[args.dist]]
    reports = [
        run_scenario(three_way_scenario(d, nsim=args.nsim, b=args.B, seed=args.seed), workers=args.workers)
        for d in dists
    ]
    print(format_report(reports))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(simulation_records(reports), indent=2) + "\n")


if __name__ == "__main__":
    main()

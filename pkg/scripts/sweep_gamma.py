#!/usr/bin/env python3
"""Sweep the centralized trigger threshold and tabulate the effect on events.

Event count versus gamma is reported descriptively; nothing is asserted about
its monotonicity.

Usage: python scripts/sweep_gamma.py [OUTDIR]
"""
import pathlib
import sys

from rigidsim.cli import sweep_command
from rigidsim.scenario import parse_scenario


def main() -> int:
    outdir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "out/sweep-gamma")
    base = parse_scenario("paper-centralized")
    rows = sweep_command(
        base,
        {"gamma": [0.1, 0.2, 0.4, 0.6, 0.8, 0.9]},
        str(outdir),
        workers=2,
    )
    print(f"{'gamma':>6} {'events':>7} {'min gap':>10} {'kappa':>7} {'final ||e||':>12}")
    for row in rows:
        print(
            f"{row['gamma']:>6} {row['event_count']:>7} {row['min_gap']:>10.2e} "
            f"{row['kappa']:>7.3f} {row['final_error_norm']:>12.3e}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Map where each minimally supported design stays globally D-optimal.

For each variance ratio r, sweeps the scaled-ED50 square (t1 < t2),
records which case of the two-group emax theorem applies and whether its
optimality inequality holds, and writes one CSV per ratio.  Also extracts
the boundary curve (smallest t2 per t1 for which the inequality holds),
which is the figure-ready summary of each panel.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from dosedesign import emax_global_check
from dosedesign.cli import fmt


def sweep(r, density):
    mesh = np.arange(1, density) / density
    rows = []
    for t1 in mesh:
        for t2 in mesh:
            if t2 <= t1:
                continue
            rows.append((float(t1), float(t2), emax_global_check(t1, t2, r)))
    return rows


def write_region_csv(path, r, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_bar_1", "theta_bar_2", "r", "case", "holds",
                         "slack", "rhs"])
        for t1, t2, chk in rows:
            writer.writerow([fmt(t1), fmt(t2), fmt(r), chk.case,
                             "true" if chk.holds else "false",
                             fmt(chk.slack), fmt(chk.rhs)])


def write_boundary_csv(path, rows):
    boundary = {}
    for t1, t2, chk in rows:
        if chk.holds and (t1 not in boundary or t2 < boundary[t1]):
            boundary[t1] = t2
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_bar_1", "smallest_holding_theta_bar_2"])
        for t1 in sorted(boundary):
            writer.writerow([fmt(t1), fmt(boundary[t1])])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--ratios", type=float, nargs="+",
                        default=[0.1, 0.5, 1.0, 2.0],
                        help="variance ratios to sweep")
    parser.add_argument("--grid", type=int, default=201,
                        help="mesh density per axis")
    parser.add_argument("--out", default="region_out", help="output directory")
    args = parser.parse_args(argv)
    if args.grid < 3:
        parser.error("--grid must be at least 3")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in args.ratios:
        if r <= 0:
            parser.error("ratios must be positive")
        rows = sweep(r, args.grid)
        write_region_csv(out / f"optimality_region_r{fmt(r)}.csv", r, rows)
        write_boundary_csv(out / f"boundary_r{fmt(r)}.csv", rows)
        held = sum(1 for _, _, chk in rows if chk.holds)
        cases = sorted({chk.case for _, _, chk in rows})
        print(f"r = {fmt(r)}: {held}/{len(rows)} pairs hold; cases {', '.join(cases)}")
    print(f"tables written to {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance of k colluding liars among N peer reviewers, for several thresholds r.

    python3 scripts/collusion_sweep.py --players 4 --trials 500 --out collusion.csv
"""

import argparse
import csv
import sys

from qcoin.harness import collusion_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--players", type=int, default=4)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--r", default="1.0,0.75,0.5,0.25", help="comma separated thresholds")
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args()

    rs = [float(x) for x in args.r.split(",")]
    rows = collusion_sweep(args.players, range(args.players + 1), rs, args.trials, args.seed)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["players", "colluders", "r", "colluder_acceptance", "honest_acceptance"])
    for row in rows:
        w.writerow([row.num_players, row.colluders, row.r, repr(row.colluder_acceptance), repr(row.honest_acceptance)])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()

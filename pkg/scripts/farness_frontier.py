"""Sweep eps at fixed d and net size; report where net certification turns on.

Example:
    python3 scripts/farness_frontier.py --d 8 --net-size 4096 --trials 100
"""
import argparse
import csv
import sys
import warnings

from cplab.rng import RandomStream
from cplab.sep_instances import SeparableRegimeWarning, farness_certification_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--net-size", type=int, default=4096)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--eps", default="0.30,0.35,0.40,0.42,0.44,0.46,0.48,0.50")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    root = RandomStream(args.seed).child("sep-farness")
    w = csv.writer(sys.stdout, lineterminator="\n")
    cols = ["d", "eps", "net_size", "frac_certified", "min_form_q50", "min_form_min", "tail_freq", "tail_bound"]
    w.writerow(cols)
    for eps in (float(e) for e in args.eps.split(",")):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SeparableRegimeWarning)
            row = farness_certification_experiment(args.d, eps, args.net_size, args.trials, root)[0]
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])


if __name__ == "__main__":
    main()

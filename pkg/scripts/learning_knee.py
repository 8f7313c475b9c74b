"""Identification-error knee of the plug-in learner on the packing, across d.

Prints one CSV row per d with the knee (first n with error < 1/3), the code
size, and the Fano bound at failure probability 1/3.
"""
import argparse
import csv
import sys

import numpy as np

from cplab import learning as lr
from cplab.rng import RandomStream


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", default="4,8,12,16")
    ap.add_argument("--eps", type=float, default=0.2)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--n-min", type=int, default=10)
    ap.add_argument("--n-max", type=int, default=20000)
    ap.add_argument("--points", type=int, default=23)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    grid = [int(x) for x in np.unique(np.round(np.geomspace(args.n_min, args.n_max, args.points)))]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["d", "m", "N", "code_method", "knee", "fano_bound", "kl_max"])
    for d in (int(x) for x in args.d.split(",")):
        rng = RandomStream(args.seed).child("cp-learning")
        ens = lr.build_packing(d, args.eps, None, rng)
        res = lr.plugin_learner_experiment(ens, grid, args.trials, rng)
        kl = lr.max_pairwise_kl(ens)
        fano = lr.fano_sample_bound(ens.N, kl, 1 / 3) if ens.N > 1 else None
        w.writerow([d, ens.m, ens.N, ens.code_method, lr.identification_knee(res), fano, repr(kl)])
        sys.stdout.flush()


if __name__ == "__main__":
    main()

"""Exact chi^2 / TV of the hard mixture against uniform as n grows, for several d.

For each d the table shows where the exact TV crosses 1/3 next to the
analytic sample threshold ceil(d / (16 eps^2)).
"""
import argparse
import csv
import sys

from cplab import hard_instances as hi
from cplab.errors import InfeasibleError


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", default="2,4,6,8,12,16")
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--n-max", type=int, default=64)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["d", "n", "chi2_exact", "chi2_bound", "tv_exact", "tv_ceiling", "threshold"])
    for d in (int(x) for x in args.d.split(",")):
        for n in range(1, args.n_max + 1):
            spec = hi.MixtureDnSpec(d, args.eps, n)
            chi2 = hi.chi2_Dn_exact(spec)
            bound = hi.chi2_Dn_bound(spec)
            try:
                tv = hi.exact_tv_Dn(spec)
            except InfeasibleError:
                tv = None
            ceiling = None if bound is None else min(1.0, (bound / 2) ** 0.5)
            w.writerow([d, n, repr(chi2), "" if bound is None else repr(bound),
                        "" if tv is None else repr(tv), "" if ceiling is None else repr(ceiling),
                        hi.sample_complexity_threshold(d, args.eps)])


if __name__ == "__main__":
    main()

"""Gap between the analytic and combinatorial microcanonical entropies as N grows."""

from __future__ import annotations

import argparse
import math

import numpy as np

from atomlab.microcanonical import entropy_analytic, entropy_combinatorial
from atomlab.validation import poisson_degree_spec


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1600, 6400])
    parser.add_argument("--edge-mean", type=float, default=3.0)
    parser.add_argument("--triangle-mean", type=float, default=3.0)
    parser.add_argument("--seed", type=int, default=100)
    args = parser.parse_args(argv)

    means = {"edge": args.edge_mean}
    if args.triangle_mean > 0:
        means["triangle"] = args.triangle_mean
    print(f"{'N':>6} {'analytic':>14} {'combinatorial':>14} {'gap':>10} {'gap/N':>10} {'gap/lnN':>8}")
    for n in args.sizes:
        spec = poisson_degree_spec(n, means, np.random.default_rng(args.seed))
        a = entropy_analytic(spec).value
        c = entropy_combinatorial(spec).value
        gap = a - c
        print(f"{n:>6} {a:>14.4f} {c:>14.4f} {gap:>10.4f} {abs(gap) / n:>10.2e} {abs(gap) / math.log(n):>8.3f}")


if __name__ == "__main__":
    main()

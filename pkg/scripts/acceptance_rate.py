"""Observed stub-matching acceptance against the predicted rate for Poisson edge degrees."""

from __future__ import annotations

import argparse

import numpy as np

from atomlab.sampler import RandomSource, observed_acceptance, predicted_acceptance
from atomlab.validation import poisson_degree_spec


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--mean", type=float, default=3.0)
    parser.add_argument("--attempts", type=int, default=10_000)
    parser.add_argument("--seeds", type=int, default=5, help="sampler seeds to run")
    parser.add_argument("--degree-seed", type=int, default=100)
    args = parser.parse_args(argv)

    spec = poisson_degree_spec(args.n, {"edge": args.mean}, np.random.default_rng(args.degree_seed))
    predicted = predicted_acceptance(spec)
    print(f"N={args.n} mean={args.mean} predicted acceptance {predicted:.5f}")
    for seed in range(args.seeds):
        stats = observed_acceptance(spec, rng=RandomSource(seed), attempts=args.attempts)
        rel = (stats.acceptance - predicted) / predicted
        print(f"seed {seed}: {stats.accepted}/{stats.attempts} = {stats.acceptance:.5f} ({rel:+.1%})")


if __name__ == "__main__":
    main()

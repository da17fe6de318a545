"""Rank-deficit tail of random permutation-pair matrices over a parameter grid."""

import argparse
import itertools
import json

from splitmix.linalg import deficit_tail_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ns", default="8,16")
    ap.add_argument("--ms", default="4,5,6")
    ap.add_argument("--qs", default="2,5")
    ap.add_argument("--ks", default="2,3,4")
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    ints = lambda s: [int(v) for v in s.split(",")]
    for n, m, q in itertools.product(ints(args.ns), ints(args.ms), ints(args.qs)):
        for r in deficit_tail_sweep(n, m, q, ints(args.ks), args.samples, args.seed):
            print(json.dumps({
                "n": n, "m": m, "q": q, "k": r.k, "empirical": r.empirical,
                "bound": r.bound, "stderr": r.stderr, "pass": r.passed,
            }))


if __name__ == "__main__":
    main()

"""Mean absolute error of the private summation pipeline across epsilon and n."""

import argparse
import itertools
import json

from splitmix.dp import default_noise, derive_dp_params, simulate_dp_sum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ns", default="100,1000")
    ap.add_argument("--epsilons", default="0.25,0.5,1,2")
    ap.add_argument("--delta", type=float, default=2.0**-20)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for n, eps in itertools.product(
        [int(v) for v in args.ns.split(",")], [float(v) for v in args.epsilons.split(",")]
    ):
        p = derive_dp_params(eps, args.delta, n)
        r = simulate_dp_sum(p, default_noise(p), args.trials, args.seed)
        print(json.dumps({
            "n": n, "epsilon": eps, "m": p.m, "q": p.q.q, "bits": p.bits_per_message,
            "mean_abs_error": r.mean_abs_error, "stderr": r.stderr,
            "error_over_target": r.mean_abs_error / r.target, "wraparounds": r.wraparounds,
        }))


if __name__ == "__main__":
    main()

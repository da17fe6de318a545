"""Exact SD between split-and-mix transcripts and the conditioned uniform reference, as m grows."""

import argparse
import json

from splitmix.analysis import (
    exact_transcript_distribution,
    statistical_distance,
    uniform_conditioned_distribution,
)
from splitmix.protocol import ProtocolParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--q", type=int, default=2)
    ap.add_argument("--x", default="1,1,0")
    ap.add_argument("--m-max", type=int, default=5)
    args = ap.parse_args()
    x = [int(v) for v in args.x.split(",")]
    for m in range(1, args.m_max + 1):
        p = ProtocolParams(args.n, m, args.q)
        sd = statistical_distance(
            exact_transcript_distribution(x, p), uniform_conditioned_distribution(sum(x) % args.q, p)
        )
        print(json.dumps({"m": m, "sd": float(sd), "sd_exact": f"{sd.numerator}/{sd.denominator}"}))


if __name__ == "__main__":
    main()

"""Command-line experiment runner.

Every subcommand emits one or more records
``{schema, subcommand, params, seed, results, pass}`` as JSON lines (or CSV).
Exit status: 0 if every record passes, 1 if some check fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Sequence

from splitmix import analysis, dp, linalg, lowerbound, protocol
from splitmix.ffield import as_modulus
from splitmix.rng import make_rng

SCHEMA = 1


@dataclass
class ExperimentRecord:
    subcommand: str
    params: dict[str, Any]
    seed: int | None
    results: dict[str, Any]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "subcommand": self.subcommand,
            "params": _render(self.params),
            "seed": self.seed,
            "results": _render(self.results),
            "pass": bool(self.passed),
        }


def _num(v: float) -> float:
    return float(f"{v:.12g}")


def _render(obj: Any) -> Any:
    """JSON-ready copy: floats to 12 significant digits, Fractions as value plus num/den."""
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if isinstance(v, Fraction):
                out[k] = _num(float(v))
                out[f"{k}_exact"] = f"{v.numerator}/{v.denominator}"
            else:
                out[k] = _render(v)
        return out
    if isinstance(obj, (list, tuple)):
        return [_render(v) for v in obj]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        return _num(obj)
    if hasattr(obj, "item"):
        return _render(obj.item())
    return str(obj)


def int_list(text: str) -> list[int]:
    """``"1,2,3"`` or a range ``"2-4"`` (inclusive); negatives allowed in lists."""
    text = text.strip()
    try:
        if "," not in text and "-" in text[1:] and not text.startswith("-"):
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 1,2,3 or 2-4, got {text!r}")


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _params(args, *names) -> dict:
    return {k: getattr(args, k) for k in names}


def _inputs(args, name: str, n: int, q: int, rng) -> list[int]:
    v = getattr(args, name)
    if v is None:
        return [int(a) for a in rng.integers(0, q, size=n)]
    if len(v) != n:
        raise ValueError(f"--{name} needs {n} entries, got {len(v)}")
    return [a % q for a in v]


# subcommands ---------------------------------------------------------------


def cmd_encode(args) -> list[ExperimentRecord]:
    q = as_modulus(args.q)
    rng = make_rng(args.seed)
    x = (args.x or [0])[0]
    sv = protocol.encode(q(x), args.m, rng)
    total = int(sv.shares.sum()) % q.q
    return [
        ExperimentRecord(
            "encode",
            {"x": x, "m": args.m, "q": q.q},
            args.seed,
            {"shares": sv.shares.tolist(), "sum": total},
            total == x % q.q,
        )
    ]


def cmd_simulate(args) -> list[ExperimentRecord]:
    params = protocol.ProtocolParams(args.n, args.m, args.q)
    q = params.q.q
    rng = make_rng(args.seed)
    mismatches = 0
    last = None
    corrupt = args.corrupt or []
    for _ in range(args.trials):
        xs = _inputs(args, "x", args.n, q, rng)
        if corrupt:
            view = protocol.simulate_with_corruptions(xs, [c - 1 for c in corrupt], params, rng)
            honest = [x for i, x in enumerate(xs) if i + 1 not in set(corrupt)]
            got = protocol.analyze(view.honest_transcript).value
            mismatches += got != sum(honest) % q
            last = view.honest_transcript
        else:
            t = protocol.run_protocol(xs, params, rng)
            mismatches += protocol.analyze(t).value != sum(xs) % q
            last = t
    results = {"trials": args.trials, "mismatches": mismatches}
    if args.trials:
        results["last_transcript"] = last.as_tuple()
    p = _params(args, "n", "m", "q", "x")
    p["corrupt"] = corrupt
    return [ExperimentRecord("simulate", p, args.seed, results, mismatches == 0)]


def cmd_msg_count(args) -> list[ExperimentRecord]:
    if args.gamma is None and args.sigma is None:
        raise ValueError("msg-count needs --gamma or --sigma")
    gamma = args.gamma if args.gamma is not None else 2.0 ** (-args.sigma - 1)
    m = protocol.required_messages(args.n, as_modulus(args.q), gamma)
    results = {"m": m, "gamma": gamma}
    if args.sigma is not None:
        results["asymptotic_term"] = protocol.asymptotic_messages(args.n, args.q, args.sigma)
    return [ExperimentRecord("msg-count", _params(args, "n", "q", "gamma", "sigma"), None, results, True)]


def cmd_sd_exact(args) -> list[ExperimentRecord]:
    params = protocol.ProtocolParams(args.n, args.m, args.q)
    q = params.q.q
    rng = make_rng(args.seed)
    x = _inputs(args, "x", args.n, q, rng)
    p = {"n": args.n, "m": args.m, "q": q, "x": x}
    if args.xp is None:
        R = analysis.exact_transcript_distribution(x, params, args.budget)
        U = analysis.uniform_conditioned_distribution(sum(x) % q, params, args.budget)
        sd = analysis.statistical_distance(R, U)
        ok = 0 <= sd <= 1
        return [ExperimentRecord("sd-exact", p, args.seed, {"sd_to_uniform": sd}, ok)]
    xp = _inputs(args, "xp", args.n, q, rng)
    p["xp"] = xp
    chk = analysis.security_check(x, xp, params, args.budget)
    results = {
        "sd": chk.sd,
        "sd_x_uniform": chk.sd_x_uniform,
        "sd_xp_uniform": chk.sd_xp_uniform,
        "bound": chk.certified_bound,
    }
    return [ExperimentRecord("sd-exact", p, args.seed, results, chk.sd <= chk.certified_bound)]


def cmd_sd_mc(args) -> list[ExperimentRecord]:
    """MC lower bound on SD(R(x), R(x')) with the distinguisher "m random messages sum to x_1"."""
    params = protocol.ProtocolParams(args.n, args.m, args.q)
    q, n, m = params.q.q, args.n, args.m
    rng = make_rng(args.seed)
    x = _inputs(args, "x", n, q, rng)
    xp = _inputs(args, "xp", n, q, rng) if args.xp is not None else [0] * (n - 1) + [sum(x) % q]
    target = x[0]

    def acceptor(t, r):
        pick = r.choice(n * m, size=m, replace=False)
        return int(t.messages[pick].sum()) % q == target

    est = analysis.mc_advantage(
        lambda r: protocol.run_protocol(x, params, r),
        lambda r: protocol.run_protocol(xp, params, r),
        acceptor,
        args.trials,
        args.seed,
    )
    results = {"estimate": est.estimate, "stderr": est.stderr}
    ok = True
    try:
        sd = analysis.security_check(x, xp, params, args.budget).sd if sum(x) % q == sum(xp) % q else None
    except analysis.BudgetExceeded:
        sd = None
    if sd is not None:
        results["sd_enumerated"] = sd
        ok = est.estimate <= float(sd) + 5 * est.stderr
    p = {"n": n, "m": m, "q": q, "x": x, "xp": xp, "trials": args.trials}
    return [ExperimentRecord("sd-mc", p, args.seed, results, ok)]


def cmd_moment_check(args) -> list[ExperimentRecord]:
    params = protocol.ProtocolParams(args.n, args.m, args.q)
    rec = analysis.second_moment_experiment(params, args.trials, args.seed)
    results = {
        "mu": rec.mu,
        "second_moment_ratio": rec.empirical_second_moment_ratio,
        "stderr": rec.stderr,
        "bound": rec.bound,
        "k_tail": {str(k): v for k, v in sorted(rec.k_tail.items())},
    }
    p = _params(args, "n", "m", "q", "trials")
    return [ExperimentRecord("moment-check", p, args.seed, results, rec.passed)]


def cmd_rank_exp(args) -> list[ExperimentRecord]:
    ks = args.k or [1, 2, 3]
    out = []
    for r in linalg.deficit_tail_sweep(args.n, args.m, args.q, ks, args.trials, args.seed):
        out.append(
            ExperimentRecord(
                "rank-exp",
                {"n": r.n, "m": r.m, "q": r.q, "k": r.k, "samples": r.samples},
                args.seed,
                {"empirical": r.empirical, "bound": r.bound, "stderr": r.stderr},
                r.passed,
            )
        )
    return out


def cmd_lemma2(args) -> list[ExperimentRecord]:
    r = linalg.lemma2_exhaustive(args.n, args.m, args.q)
    results = {
        "pairs_checked": r.pairs_checked,
        "distinct_matrices": r.distinct_matrices,
        "exceptions": r.exceptions,
        "converse_failures": r.converse_failures,
        "equivalence_failures": r.equivalence_failures,
    }
    ok = r.exceptions == 0 and r.converse_failures == 0
    return [ExperimentRecord("lemma2", _params(args, "n", "m", "q"), None, results, ok)]


def cmd_lb_field(args) -> list[ExperimentRecord]:
    s = args.s
    r = lowerbound.avg_field_distance(args.n, args.m, args.q, s, budget=args.budget)
    results = {
        "exact_value": r.d_avg,
        "bound": r.bound,
        "witness": [list(r.witness[0]), list(r.witness[1])],
        "witness_sd": r.witness_sd,
    }
    if args.sigma is not None:
        summary = lowerbound.lower_bound_summary(args.n, args.q, args.sigma)
        results["m_field"] = summary.m_field
        results["m_security"] = summary.m_security
    p = _params(args, "n", "m", "q", "s", "sigma")
    return [ExperimentRecord("lb-field", p, None, results, r.passed)]


def cmd_lb_dist(args) -> list[ExperimentRecord]:
    enc = lowerbound.splitmix_encoder(args.q, args.m)
    run = lowerbound.general_distinguisher(enc, args.n, args.budget)
    ok = run.passed
    results = {
        "t": run.marginal.t,
        "x_star": run.marginal.x_star,
        "marginal_sd": run.marginal.sd,
        "bound": run.floor,
        "exact_value": run.total_advantage,
        "witness": list(run.x),
        "category_probs": run.category_probs,
        "delta_by_category": run.delta_by_category,
        "lemma_checks": dict(sorted(run.lemma_checks.items())),
    }
    try:
        sd = lowerbound.splitmix_exact_sd(args.n, args.m, args.q, run.x)
        results["exact_sd"] = sd
        ok = ok and run.total_advantage <= sd
    except analysis.BudgetExceeded:
        pass
    warm = lowerbound.splitmix_distinguisher_advantage(
        args.n, args.m, args.q, budget=args.budget, trials=args.trials, seed=args.seed
    )
    results["warmup_advantage"] = warm.advantage
    results["warmup_floor"] = warm.floor
    results["warmup_exact"] = warm.exact
    ok = ok and warm.passed
    return [ExperimentRecord("lb-dist", _params(args, "n", "m", "q"), args.seed, results, ok)]


def cmd_dp_sum(args) -> list[ExperimentRecord]:
    out = []
    for eps in args.epsilon or [1.0]:
        p = dp.derive_dp_params(eps, args.delta, args.n)
        noise = dp.default_noise(p) if args.noise == "default" else dp.zero_noise()
        sim = dp.simulate_dp_sum(p, noise, args.trials, args.seed, inputs=args.inputs)
        acct = dp.dp_privacy_accounting(p, noise)
        results = {
            "mean_abs_error": sim.mean_abs_error,
            "stderr": sim.stderr,
            "max_abs_error": sim.max_abs_error,
            "target": sim.target,
            "tolerance": sim.tolerance,
            "wraparounds": sim.wraparounds,
            "m": p.m,
            "q": p.q.q,
            "sigma": p.sigma,
            "scale": p.scale,
            "bits_per_message": p.bits_per_message,
            "delta_security": acct.delta_security,
            "delta_noise": acct.delta_noise,
            "delta_total": acct.delta_total,
            "truncation_bound": acct.truncation_bound,
            "worst_case_wrap_free": acct.worst_case_wrap_free,
        }
        ok = sim.passed and acct.within_target
        if args.noise == "none" and args.inputs == "grid":
            ok = ok and sim.max_abs_error == 0
        params = {
            "n": args.n,
            "epsilon": eps,
            "delta": args.delta,
            "trials": args.trials,
            "noise": args.noise,
            "inputs": args.inputs,
        }
        out.append(ExperimentRecord("dp-sum", params, args.seed, results, ok))
    return out


def cmd_facts_check(args) -> list[ExperimentRecord]:
    checked, violations = linalg.facts_trials(args.trials, args.seed)
    results = {"checked": checked, "violations": len(violations)}
    if violations:
        results["first_violation"] = [list(violations[0][0]), list(violations[0][1])]
    return [ExperimentRecord("facts-check", {"trials": args.trials}, args.seed, results, not violations)]


def cmd_figure1(args) -> list[ExperimentRecord]:
    ns = args.n_list or [100, 1000, 10000]
    eps = args.epsilon or [1.0]
    grid = list(itertools.product(ns, eps, [args.delta]))
    out = []
    for row in dp.figure1_table(grid):
        row = dict(row)
        name = row.pop("protocol")
        params = {"protocol": name}
        for k in ("n", "epsilon", "delta"):
            if k in row:
                params[k] = row.pop(k)
        out.append(ExperimentRecord("figure1", params, None, row, True))
    return out


# parser ----------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, *flags: str) -> None:
    spec = {
        "n": dict(type=int, default=3, help="number of parties (default 3)"),
        "m": dict(type=int, default=2, help="messages per party (default 2)"),
        "q": dict(type=int, default=5, help="prime field order (default 5)"),
        "sigma": dict(type=float, default=None, help="security parameter in bits"),
        "gamma": dict(type=float, default=None, help="target statistical distance in (0, 1]"),
        "epsilon": dict(type=float_list, default=None, help="privacy epsilon(s), comma-separated (default 1)"),
        "delta": dict(type=float, default=2.0**-20, help="privacy delta in (0, 1) (default 2^-20)"),
        "k": dict(type=int_list, default=None, help="rank-deficit thresholds, e.g. 2,3,4 or 2-4 (default 1-3)"),
        "trials": dict(type=int, default=1000, help="trials or samples (default 1000)"),
        "seed": dict(type=int, default=0, help="64-bit RNG seed (default 0)"),
        "budget": dict(type=int, default=analysis.DEFAULT_BUDGET, help="exact enumeration budget in states (default 1e8)"),
        "x": dict(type=int_list, default=None, help="input vector, comma-separated field elements (default random)"),
        "xp": dict(type=int_list, default=None, help="second input vector with the same sum"),
        "corrupt": dict(type=int_list, default=None, help="1-based indices of colluding parties"),
        "s": dict(type=int, default=0, help="target input sum (default 0)"),
    }
    for f in flags:
        p.add_argument(f"--{f}", **spec[f])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitmix", description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=None, help="write records to this file instead of stdout")
    parser.add_argument("--format", choices=("json", "csv"), default="json", help="record format (default json)")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    def add(name: str, fn: Callable, help: str, *flags: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        _common(p, *flags)
        p.add_argument("--out", default=argparse.SUPPRESS, help="write records to this file")
        p.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS, help="record format")
        p.set_defaults(func=fn)
        return p

    add("encode", cmd_encode, "split one input into m shares", "m", "q", "x", "seed")
    add("simulate", cmd_simulate, "run encode/shuffle/analyze and check the sum", "n", "m", "q", "x", "corrupt", "trials", "seed")
    add("msg-count", cmd_msg_count, "messages per party certified for a target distance", "n", "q", "gamma", "sigma")
    add("sd-exact", cmd_sd_exact, "exact statistical distances by enumeration", "n", "m", "q", "x", "xp", "seed", "budget")
    add("sd-mc", cmd_sd_mc, "Monte Carlo distinguishing advantage (lower bound on SD)", "n", "m", "q", "x", "xp", "trials", "seed", "budget")
    add("moment-check", cmd_moment_check, "second-moment estimate against its series bound", "n", "m", "q", "trials", "seed")
    add("rank-exp", cmd_rank_exp, "rank-deficit tail of random permutation-pair matrices", "n", "m", "q", "k", "trials", "seed")
    add("lemma2", cmd_lemma2, "exhaustive deficit/matching-partition check (mn <= 6)", "n", "m", "q")
    add("lb-field", cmd_lb_field, "average output distance over inputs with a fixed sum", "n", "m", "q", "s", "sigma", "budget")
    add("lb-dist", cmd_lb_dist, "marginal distinguisher and warm-up distinguisher advantages", "n", "m", "q", "trials", "seed", "budget")
    p = add("dp-sum", cmd_dp_sum, "differentially private real summation harness", "n", "epsilon", "delta", "trials", "seed")
    p.add_argument("--noise", choices=("none", "default"), default="default", help="noise mechanism (default: distributed discrete Laplace)")
    p.add_argument("--inputs", choices=("random", "grid"), default="random", help="input generator (default random in [0,1])")
    add("facts-check", cmd_facts_check, "random checks of two multinomial inequalities", "trials", "seed")
    p = add("figure1", cmd_figure1, "message-count / message-size comparison table", "epsilon", "delta")
    p.add_argument("--n", dest="n_list", type=int_list, default=None, help="party counts (default 100,1000,10000)")
    return parser


def _csv(records: Sequence[dict]) -> str:
    flat = []
    for r in records:
        row = {"schema": r["schema"], "subcommand": r["subcommand"], "seed": r["seed"], "pass": r["pass"]}
        for sect in ("params", "results"):
            for k, v in r[sect].items():
                row[f"{sect}.{k}"] = json.dumps(v, sort_keys=True) if isinstance(v, (list, dict)) else v
        flat.append(row)
    cols = ["schema", "subcommand", "seed", "pass"]
    cols += sorted({k for row in flat for k in row} - set(cols))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(flat)
    return buf.getvalue()


def serialize(records: Sequence[ExperimentRecord], fmt: str = "json") -> str:
    dicts = [r.to_dict() for r in records]
    if fmt == "csv":
        return _csv(dicts)
    return "".join(json.dumps(d, sort_keys=True) + "\n" for d in dicts)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        records = args.func(args)
    except (ValueError, analysis.BudgetExceeded) as e:
        print(f"splitmix {args.subcommand}: {e}", file=sys.stderr)
        return 2
    text = serialize(records, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if all(r.passed for r in records) else 1


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()

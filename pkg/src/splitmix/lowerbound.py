"""Lower-bound constructions for anonymized-channel summation.

Two families of checks:

* field-dependent: for a fixed sum ``s`` the shuffled outputs of most input
  pairs in ``B_s`` must be far apart, because one output can only be
  explained by at most ``n^(nm)`` inputs;
* security-dependent: a distinguisher that reads a random ``t``-subset of the
  shuffled messages, where ``t`` is the first marginal size at which some
  input becomes noticeably different from 0.

Encoders are explicit probability tables over ``[ell]^m`` (0-based alphabet).
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from splitmix.analysis import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    DistributionTable,
    McEstimate,
    exact_transcript_distribution,
    mc_advantage,
    statistical_distance,
)
from splitmix.ffield import PrimeModulus, as_modulus
from splitmix.protocol import ProtocolParams, run_protocol
from splitmix.rng import make_rng

Word = tuple[int, ...]
Dist = dict[Word, Fraction]


def _symmetrize(dist: Mapping[Word, Fraction]) -> Dist:
    out: dict[Word, Fraction] = defaultdict(Fraction)
    for word, p in dist.items():
        perms = list(itertools.permutations(word))
        for w in perms:
            out[w] += Fraction(p) / len(perms)
    return {w: p for w, p in out.items() if p}


@dataclass(frozen=True)
class EncoderSpec:
    """A randomized encoder F_q -> [ell]^m given as exact per-input tables.

    Tables are symmetrized over coordinate orderings at construction, so the
    encoding of each input is exchangeable.
    """

    q: PrimeModulus
    alphabet_size: int
    m: int
    table: Mapping[int, Mapping[Word, Fraction]]
    estimated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "q", as_modulus(self.q))
        if self.m < 1 or self.alphabet_size < 1:
            raise ValueError("need m >= 1 and a non-empty alphabet")
        if set(self.table) != set(range(self.q.q)):
            raise ValueError("table must define an encoding for every input in F_q")
        sym = {}
        for x, dist in self.table.items():
            for w in dist:
                if len(w) != self.m or any(not 0 <= v < self.alphabet_size for v in w):
                    raise ValueError(f"encoding {w} of input {x} is not a word in [ell]^m")
            if sum(Fraction(p) for p in dist.values()) != 1:
                raise ValueError(f"encoding distribution of input {x} does not sum to 1")
            sym[x] = _symmetrize(dist)
        object.__setattr__(self, "table", sym)

    def marginal(self, x: int, t: int) -> Dist:
        """Distribution of the first ``t`` coordinates of Enc(x)."""
        out: dict[Word, Fraction] = defaultdict(Fraction)
        for w, p in self.table[int(x) % self.q.q].items():
            out[w[:t]] += p
        return dict(out)

    def multiset_distribution(self, x: int) -> Dist:
        out: dict[Word, Fraction] = defaultdict(Fraction)
        for w, p in self.table[int(x) % self.q.q].items():
            out[tuple(sorted(w))] += p
        return dict(out)

    @classmethod
    def from_sampler(
        cls,
        sampler: Callable[[int, np.random.Generator], Sequence[int]],
        q: int,
        m: int,
        alphabet_size: int,
        samples: int,
        seed: int,
    ) -> "EncoderSpec":
        """Empirical tables from a black-box encoder; results carry sampling error."""
        rng = make_rng(seed)
        table = {}
        for x in range(int(q)):
            counts = Counter(tuple(int(v) for v in sampler(x, rng)) for _ in range(samples))
            table[x] = {w: Fraction(c, samples) for w, c in counts.items()}
        return cls(q, alphabet_size, m, table, estimated=True)


def splitmix_encoder(q: int, m: int) -> EncoderSpec:
    """Split-and-mix as a table: all ordered share tuples summing to x, equally likely."""
    q = as_modulus(q).q
    p = Fraction(1, q ** (m - 1))
    table: dict[int, Dist] = {x: {} for x in range(q)}
    for prefix in itertools.product(range(q), repeat=m - 1):
        for x in range(q):
            table[x][prefix + ((x - sum(prefix)) % q,)] = p
    return EncoderSpec(q, q, m, table)


def check_disjoint_supports(enc: EncoderSpec) -> bool:
    seen: set[Word] = set()
    for x in range(enc.q.q):
        support = set(enc.table[x])
        if support & seen:
            return False
        seen |= support
    return True


def _sum_vectors(n: int, q: int, s: int) -> list[tuple[int, ...]]:
    """B_s: all inputs in F_q^n with coordinate sum s."""
    return [
        head + ((s - sum(head)) % q,) for head in itertools.product(range(q), repeat=n - 1)
    ]


def encoder_transcript_distribution(enc: EncoderSpec, xs: Sequence[int]) -> DistributionTable:
    """Exact distribution of the shuffled multiset of all parties' messages."""
    acc: dict[Word, Fraction] = {(): Fraction(1)}
    for x in xs:
        party = enc.multiset_distribution(x)
        nxt: dict[Word, Fraction] = defaultdict(Fraction)
        for a, pa in acc.items():
            for b, pb in party.items():
                nxt[tuple(sorted(a + b))] += pa * pb
        acc = nxt
    return DistributionTable.from_mapping(acc, enc.q.q, len(xs), enc.m)


@dataclass(frozen=True)
class FieldDistance:
    d_avg: Fraction
    bound: Fraction
    witness: tuple[tuple[int, ...], tuple[int, ...]]
    witness_sd: Fraction

    @property
    def passed(self) -> bool:
        return self.d_avg >= self.bound and self.witness_sd >= self.bound


def avg_field_distance(
    n: int, m: int, q: int, s: int, enc: EncoderSpec | None = None, budget: int = DEFAULT_BUDGET
) -> FieldDistance:
    """Average SD between shuffled outputs over all ordered pairs in B_s.

    The witness is the first pair (in enumeration order) achieving the largest SD.
    """
    q = as_modulus(q).q
    enc = enc or splitmix_encoder(q, m)
    if enc.m != m or enc.q.q != q:
        raise ValueError("encoder does not match (m, q)")
    inputs = _sum_vectors(n, q, s)
    if len(inputs) ** 2 > budget:
        raise BudgetExceeded(f"{len(inputs) ** 2} input pairs exceed the budget {budget}")
    dists = [encoder_transcript_distribution(enc, x) for x in inputs]
    total = Fraction(0)
    best, witness = Fraction(-1), (inputs[0], inputs[0])
    for i, j in itertools.product(range(len(inputs)), repeat=2):
        sd = Fraction(statistical_distance(dists[i], dists[j]))
        total += sd
        if sd > best:
            best, witness = sd, (inputs[i], inputs[j])
    bound = 1 - Fraction(n ** (n * m), q ** (n - 1))
    return FieldDistance(total / len(inputs) ** 2, bound, witness, best)


@dataclass(frozen=True)
class InvyResult:
    count: int
    bound: int

    @property
    def passed(self) -> bool:
        return self.count <= self.bound


def invy_bound_check(
    y: Sequence[int], n: int, m: int, q: int, s: int, enc: EncoderSpec | None = None
) -> InvyResult:
    """Number of sum-s inputs that can produce the shuffled output ``y``."""
    q = as_modulus(q).q
    enc = enc or splitmix_encoder(q, m)
    y = tuple(sorted(int(v) for v in y))
    count = sum(
        1 for x in _sum_vectors(n, q, s) if encoder_transcript_distribution(enc, x).prob(y) > 0
    )
    return InvyResult(count, min(q ** (n - 1), n ** (n * m)))


@dataclass(frozen=True)
class WarmupResult:
    advantage: float | Fraction
    floor: float
    exact: bool
    stderr: float = 0.0

    @property
    def passed(self) -> bool:
        return self.advantage + 5 * self.stderr >= self.floor


def _zero_subset_fraction(ms: Sequence[int], m: int, q: int) -> Fraction:
    hits = sum(1 for c in itertools.combinations(ms, m) if sum(c) % q == 0)
    return Fraction(hits, math.comb(len(ms), m))


def splitmix_distinguisher_advantage(
    n: int,
    m: int,
    q: int,
    x: Sequence[int] | None = None,
    budget: int = DEFAULT_BUDGET,
    trials: int = 10**5,
    seed: int = 0,
) -> WarmupResult:
    """Advantage of "m random messages sum to 0" at telling S(0) from S(x).

    ``x`` defaults to (1, ..., 1, -(n-1)). Exact when the transcript
    enumeration fits the budget, Monte Carlo otherwise.
    """
    q = as_modulus(q).q
    x = tuple(int(v) % q for v in (x if x is not None else [1] * (n - 1) + [-(n - 1)]))
    if len(x) != n or sum(x) % q:
        raise ValueError("x must have n entries summing to 0")
    params = ProtocolParams(n, m, q)
    floor = 1 / (math.e * n) ** m
    per_table = q ** ((m - 1) * n) * math.comb(n * m, m)
    if per_table <= budget:
        adv = Fraction(0)
        for xs, sign in (((0,) * n, 1), (x, -1)):
            table = exact_transcript_distribution(xs, params, budget)
            for ms, p in zip(table.support, table.probs):
                adv += sign * p * _zero_subset_fraction(ms, m, q)
        return WarmupResult(adv, floor, exact=True)

    def acceptor(t, rng):
        pick = rng.choice(n * m, size=m, replace=False)
        return int(t.messages[pick].sum()) % q == 0

    est: McEstimate = mc_advantage(
        lambda rng: run_protocol((0,) * n, params, rng),
        lambda rng: run_protocol(x, params, rng),
        acceptor,
        trials,
        seed,
    )
    return WarmupResult(est.estimate, floor, exact=False, stderr=est.stderr)


@dataclass(frozen=True)
class MarginalSpec:
    t: int
    x_star: int
    H: frozenset[Word]
    threshold: Fraction
    sd: Fraction


@dataclass(frozen=True)
class CountCase:
    """One class of random positions: how many chosen messages come from each party."""

    counts: tuple[int, ...]
    prob: Fraction
    delta: Fraction
    category: str


@dataclass(frozen=True)
class DistinguisherRun:
    marginal: MarginalSpec
    x: tuple[int, ...]
    category_probs: dict[str, Fraction]
    delta_by_category: dict[str, Fraction]
    total_advantage: Fraction
    floor: Fraction
    cases: tuple[CountCase, ...]
    lemma_checks: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.category_probs.values()) != 1:
            raise ValueError("category probabilities must sum to 1")

    @property
    def passed(self) -> bool:
        return self.total_advantage >= self.floor and all(self.lemma_checks.values())


def _sd(d1: Mapping[Word, Fraction], d2: Mapping[Word, Fraction]) -> Fraction:
    keys = set(d1) | set(d2)
    return sum((abs(d1.get(k, 0) - d2.get(k, 0)) for k in keys), Fraction(0)) / 2


def _threshold(n: int, m: int, t: int) -> Fraction:
    return Fraction(1, (10 * n * m) ** (4 * (m - t)))


def _count_vectors(n: int, m: int, t: int):
    def rec(i, left):
        if i == n - 1:
            if left <= m:
                yield (left,)
            return
        for c in range(min(m, left) + 1):
            for rest in rec(i + 1, left - c):
                yield (c,) + rest

    yield from rec(0, t)


def _prob_in_H(enc: EncoderSpec, inputs: Sequence[int], counts: Sequence[int], H) -> Fraction:
    """Pr that the concatenated marginals (c_i coords of party i) land in H."""
    margs = [enc.marginal(v, c) for v, c in zip(inputs, counts)]
    total = Fraction(0)
    for h in H:
        p, pos = Fraction(1), 0
        for dist, c in zip(margs, counts):
            p *= dist.get(h[pos : pos + c], 0)
            pos += c
            if not p:
                break
        total += p
    return total


def general_distinguisher(
    enc: EncoderSpec, n: int, budget: int = DEFAULT_BUDGET
) -> DistinguisherRun:
    """Exact advantage of the t-marginal distinguisher against S(0) vs S(x*,...,-(n-1)x*)."""
    if n <= 2:
        raise ValueError(f"the distinguisher needs n > 2, got n={n}")
    q, m = enc.q.q, enc.m
    if enc.alphabet_size**m > budget:
        raise BudgetExceeded(f"alphabet^m = {enc.alphabet_size**m} exceeds the budget {budget}")

    spec = None
    minimal = True
    for t in range(1, m + 1):
        d0 = enc.marginal(0, t)
        sds = {x: _sd(d0, enc.marginal(x, t)) for x in range(q)}
        best = max(sds.values())
        thr = _threshold(n, m, t)
        if best >= thr:
            x_star = min(x for x, v in sds.items() if v == best)
            dx = enc.marginal(x_star, t)
            H = frozenset(y for y in d0 if d0[y] > dx.get(y, 0))
            spec = MarginalSpec(t, x_star, H, thr, best)
            break
    if spec is None:
        raise ValueError("no marginal separates the inputs; the encoder cannot be correct")
    t = spec.t
    # Re-assert minimality independently of the search loop above.
    for tp in range(1, t):
        d0 = enc.marginal(0, tp)
        if any(_sd(d0, enc.marginal(x, tp)) >= _threshold(n, m, tp) for x in range(q)):
            minimal = False

    x = tuple([spec.x_star] * (n - 1) + [(-(n - 1) * spec.x_star) % q])
    zero = (0,) * n
    denom = math.comb(n * m, t)
    cases = []
    for counts in _count_vectors(n, m, t):
        prob = Fraction(math.prod(math.comb(m, c) for c in counts), denom)
        if not prob:
            continue
        delta = _prob_in_H(enc, zero, counts, spec.H) - _prob_in_H(enc, x, counts, spec.H)
        C = max(counts)
        category = "III" if C < t else ("II" if counts[-1] == t else "I")
        cases.append(CountCase(counts, prob, delta, category))

    cat_p = {c: sum((k.prob for k in cases if k.category == c), Fraction(0)) for c in ("I", "II", "III")}
    cat_d = {
        c: (sum((k.prob * k.delta for k in cases if k.category == c), Fraction(0)) / cat_p[c])
        if cat_p[c]
        else Fraction(0)
        for c in cat_p
    }
    total = sum((k.prob * k.delta for k in cases), Fraction(0))
    single = Fraction(math.comb(m, t), denom)

    def tail_ok(j: int) -> bool:
        pj = sum((k.prob for k in cases if max(k.counts) == j), Fraction(0))
        return pj <= n * single * (n * m) ** (3 * (t - j))

    checks = {
        "minimal_t": minimal,
        "category_I_delta_equals_sd": all(k.delta == spec.sd for k in cases if k.category == "I"),
        "category_I_probability": cat_p["I"] == (n - 1) * single,
        "category_II_delta_at_most_sd": all(abs(k.delta) <= spec.sd for k in cases if k.category == "II"),
        "category_II_probability": cat_p["II"] == single,
        "category_III_delta_small": all(
            abs(k.delta) < Fraction(m, (10 * n * m) ** (4 * (m - max(k.counts))))
            for k in cases
            if k.category == "III"
        ),
        "category_III_tail": all(tail_ok(j) for j in range(1, t)),
    }
    return DistinguisherRun(
        marginal=spec,
        x=x,
        category_probs=cat_p,
        delta_by_category=cat_d,
        total_advantage=total,
        floor=Fraction(1, (10 * n * m) ** (5 * m)),
        cases=tuple(cases),
        lemma_checks=checks,
    )


def splitmix_exact_sd(n: int, m: int, q: int, x: Sequence[int]) -> Fraction:
    """SD(S(0), S(x)) for split-and-mix via the analysis enumerator."""
    params = ProtocolParams(n, m, q)
    return Fraction(
        statistical_distance(
            exact_transcript_distribution((0,) * n, params),
            exact_transcript_distribution(tuple(x), params),
        )
    )


@dataclass(frozen=True)
class LowerBoundSummary:
    m_field: int
    m_security: int


def _pow_ge(base: int, exp: int, rhs_num: int, rhs_den: int) -> bool:
    return base**exp * rhs_den >= rhs_num


def lower_bound_summary(n: int, q: int, sigma: float) -> LowerBoundSummary:
    """Finite message-count floors implied by the two lower-bound inequalities.

    m_field: least m with n^(nm) >= q^(n-1) (1 - 2^-sigma).
    m_security: least m with (10nm)^(5m) >= 2^sigma (1 when n <= 2, where the
    distinguisher does not apply).
    """
    if sigma < 1:
        raise ValueError(f"sigma must be at least 1, got {sigma}")
    q = int(q)
    exact = float(sigma).is_integer()
    s = int(sigma) if exact else None

    def field_ok(m: int) -> bool:
        if n == 1:
            return True
        if exact:
            return n ** (n * m) * 2**s >= q ** (n - 1) * (2**s - 1)
        return n * m * math.log2(n) >= (n - 1) * math.log2(q) + math.log2(1 - 2.0**-sigma)

    def security_ok(m: int) -> bool:
        if exact:
            return (10 * n * m) ** (5 * m) >= 2**s
        return 5 * m * math.log2(10 * n * m) >= sigma

    m_field = 1
    while not field_ok(m_field):
        m_field += 1
    m_security = 1
    if n > 2:
        while not security_ok(m_security):
            m_security += 1
    return LowerBoundSummary(m_field, m_security)

"""Exact and Monte-Carlo distributional analysis of split-and-mix transcripts.

Exact tables are built over canonical multisets. Internally a multiset over
F_q is a histogram (count of each field value), which makes the union of two
parties' messages a vector addition; tables expose sorted tuples.
"""

from __future__ import annotations

import functools
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from splitmix.ffield import FieldElement
from splitmix.protocol import ProtocolParams, Transcript
from splitmix.rng import make_rng, spawn

DEFAULT_BUDGET = 10**8

Histogram = tuple[int, ...]
Multiset = tuple[int, ...]


class BudgetExceeded(RuntimeError):
    """An exact enumeration would visit more states than the configured budget."""


def _check_budget(states: int, budget: int, what: str) -> None:
    if states > budget:
        raise BudgetExceeded(f"{what} needs {states} states, budget is {budget}")


def hist_to_multiset(h: Histogram) -> Multiset:
    return tuple(v for v, c in enumerate(h) for _ in range(c))


def multiset_to_hist(ms: Sequence[int], q: int) -> Histogram:
    h = [0] * q
    for v in ms:
        h[int(v)] += 1
    return tuple(h)


@dataclass(frozen=True)
class DistributionTable:
    """Probability table over canonical multisets (sorted tuples).

    ``probs`` are Fractions in exact mode; floats are accepted with a 1e-12
    normalisation tolerance.
    """

    support: tuple[Multiset, ...]
    probs: tuple[Real, ...]
    q: int | None = None
    n: int | None = None
    m: int | None = None

    def __post_init__(self):
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs differ in length")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support entries must be distinct")
        for s in self.support:
            if list(s) != sorted(s):
                raise ValueError(f"support entry {s} is not canonically sorted")
        total = sum(self.probs)
        if self.exact:
            if total != 1:
                raise ValueError(f"probabilities sum to {total}, not 1")
        elif abs(total - 1) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @classmethod
    def from_mapping(cls, mapping: Mapping[Multiset, Real], q=None, n=None, m=None):
        items = sorted((tuple(k), p) for k, p in mapping.items() if p != 0)
        return cls(tuple(k for k, _ in items), tuple(p for _, p in items), q, n, m)

    @classmethod
    def from_counts(cls, counts: Mapping[Histogram, int], total: int, q=None, n=None, m=None):
        return cls.from_mapping(
            {hist_to_multiset(h): Fraction(c, total) for h, c in counts.items()}, q, n, m
        )

    @property
    def exact(self) -> bool:
        return all(isinstance(p, (int, Fraction)) for p in self.probs)

    def as_dict(self) -> dict[Multiset, Real]:
        return dict(zip(self.support, self.probs))

    def prob(self, multiset: Sequence[int]) -> Real:
        return self.as_dict().get(tuple(sorted(multiset)), 0)

    def to_dict(self) -> dict:
        entries = []
        for s, p in zip(self.support, self.probs):
            f = Fraction(p) if self.exact else Fraction(p).limit_denominator(10**15)
            entries.append({"multiset": list(s), "prob_num": f.numerator, "prob_den": f.denominator})
        return {"q": self.q, "n": self.n, "m": self.m, "entries": entries}

    @classmethod
    def from_dict(cls, obj: Mapping) -> "DistributionTable":
        mapping = {
            tuple(e["multiset"]): Fraction(e["prob_num"], e["prob_den"]) for e in obj["entries"]
        }
        return cls.from_mapping(mapping, obj.get("q"), obj.get("n"), obj.get("m"))


@functools.lru_cache(maxsize=256)
def _party_hist_counts(x: int, m: int, q: int) -> tuple[tuple[Histogram, int], ...]:
    counts: Counter = Counter()
    for prefix in itertools.product(range(q), repeat=m - 1):
        h = [0] * q
        for v in prefix:
            h[v] += 1
        h[(x - sum(prefix)) % q] += 1
        counts[tuple(h)] += 1
    return tuple(counts.items())


def convolve_hists(
    a: Mapping[Histogram, int], b: Sequence[tuple[Histogram, int]] | Mapping[Histogram, int]
) -> Counter:
    """Distribution of the union of two independent multisets (as count tables)."""
    items = b.items() if isinstance(b, Mapping) else b
    out: Counter = Counter()
    for h1, c1 in a.items():
        for h2, c2 in items:
            out[tuple(u + v for u, v in zip(h1, h2))] += c1 * c2
    return out


def _inputs(x: Sequence[int | FieldElement], params: ProtocolParams) -> list[int]:
    if len(x) != params.n:
        raise ValueError(f"expected {params.n} inputs, got {len(x)}")
    return [int(v) % params.q.q for v in x]


def exact_transcript_distribution(
    x: Sequence[int | FieldElement], params: ProtocolParams, budget: int = DEFAULT_BUDGET
) -> DistributionTable:
    """Exact law of the shuffled multiset under inputs ``x`` (all q^((m-1)n) share choices)."""
    q, n, m = params.q.q, params.n, params.m
    xs = _inputs(x, params)
    _check_budget(q ** ((m - 1) * n), budget, "transcript enumeration")
    dist: Counter = Counter({(0,) * q: 1})
    for xi in xs:
        dist = convolve_hists(dist, _party_hist_counts(xi, m, q))
    return DistributionTable.from_counts(dist, q ** ((m - 1) * n), q, n, m)


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` non-negative ints summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def multinomial(counts: Sequence[int]) -> int:
    out, acc = 1, 0
    for c in counts:
        acc += c
        out *= math.comb(acc, c)
    return out


def uniform_conditioned_distribution(
    a: int | FieldElement, params: ProtocolParams, budget: int = DEFAULT_BUDGET
) -> DistributionTable:
    """Law of the multiset of a uniform vector in F_q^(mn) whose coordinates sum to ``a``."""
    q, N = params.q.q, params.n * params.m
    a = int(a) % q
    _check_budget(q ** (N - 1), budget, "conditioned-uniform enumeration")
    counts = {
        h: multinomial(h)
        for h in compositions(N, q)
        if sum(v * c for v, c in enumerate(h)) % q == a
    }
    return DistributionTable.from_counts(counts, q ** (N - 1), q, params.n, params.m)


def statistical_distance(d1: DistributionTable, d2: DistributionTable) -> Real:
    """Half the L1 distance over the union of supports; exact when both tables are."""
    if d1.q is not None and d2.q is not None and d1.q != d2.q:
        raise ValueError("tables live over different fields")
    p1, p2 = d1.as_dict(), d2.as_dict()
    total = sum(abs(p1.get(y, 0) - p2.get(y, 0)) for y in set(p1) | set(p2))
    return total / 2 if isinstance(total, float) else Fraction(total) / 2


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    stderr: float
    accept1: float
    accept2: float
    trials: int


def mc_advantage(
    sampler1: Callable[[np.random.Generator], Transcript],
    sampler2: Callable[[np.random.Generator], Transcript],
    acceptor: Callable[[Transcript, np.random.Generator], bool],
    trials: int,
    seed: int,
) -> McEstimate:
    """Empirical Pr[accept | sampler1] - Pr[accept | sampler2] with binomial standard error.

    The acceptor gets its own generator so randomised distinguishers stay reproducible.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    s1, s2, a1, a2 = spawn(seed, 4)
    hits1 = sum(bool(acceptor(sampler1(s1), a1)) for _ in range(trials))
    hits2 = sum(bool(acceptor(sampler2(s2), a2)) for _ in range(trials))
    p1, p2 = hits1 / trials, hits2 / trials
    stderr = math.sqrt(p1 * (1 - p1) / trials + p2 * (1 - p2) / trials)
    return McEstimate(p1 - p2, stderr, p1, p2, trials)


@dataclass(frozen=True)
class SecurityCheck:
    sd: Real
    sd_x_uniform: Real
    sd_xp_uniform: Real

    @property
    def certified_bound(self) -> Real:
        """Triangle-inequality upper bound on ``sd`` through the conditioned uniform law."""
        return self.sd_x_uniform + self.sd_xp_uniform


def security_check(
    x: Sequence[int], x_prime: Sequence[int], params: ProtocolParams, budget: int = DEFAULT_BUDGET
) -> SecurityCheck:
    q = params.q.q
    xs, xps = _inputs(x, params), _inputs(x_prime, params)
    a = sum(xs) % q
    if a != sum(xps) % q:
        raise ValueError("inputs must have equal sums for a security comparison")
    r1 = exact_transcript_distribution(xs, params, budget)
    r2 = exact_transcript_distribution(xps, params, budget)
    u = uniform_conditioned_distribution(a, params, budget)
    return SecurityCheck(
        sd=statistical_distance(r1, r2),
        sd_x_uniform=statistical_distance(r1, u),
        sd_xp_uniform=statistical_distance(r2, u),
    )


@functools.lru_cache(maxsize=32)
def _conditioned_vectors(q: int, length: int, a: int) -> np.ndarray:
    prefix = np.array(list(itertools.product(range(q), repeat=length - 1)), dtype=np.int64)
    prefix = prefix.reshape(q ** (length - 1), length - 1)
    last = (a - prefix.sum(axis=1)) % q
    out = np.concatenate([prefix, last[:, None]], axis=1)
    out.setflags(write=False)
    return out


def block_sums(t: np.ndarray, pi: np.ndarray, n: int, m: int, q: int) -> np.ndarray:
    """Party sums under a permutation: row ``i`` sums t[pi[j]] over j in party i's block.

    ``t`` is ``(B, mn)``; ``pi`` is ``(mn,)`` or ``(B, mn)``.
    """
    pi = np.broadcast_to(pi, t.shape)
    return np.take_along_axis(t, pi, axis=1).reshape(len(t), n, m).sum(axis=2) % q


def first_moment_check(
    pi: Sequence[int],
    x: Sequence[int],
    a: int | FieldElement,
    params: ProtocolParams,
    budget: int = DEFAULT_BUDGET,
) -> Fraction:
    """Exact Pr over t ~ U_a that the party sums of t under ``pi`` equal ``x``."""
    q, n, m = params.q.q, params.n, params.m
    xs = _inputs(x, params)
    a = int(a) % q
    if sum(xs) % q != a:
        raise ValueError("x must sum to a")
    pi = np.asarray(pi, dtype=np.int64)
    if sorted(pi.tolist()) != list(range(n * m)):
        raise ValueError("pi must be a permutation of range(n*m)")
    _check_budget(q ** (n * m - 1), budget, "first-moment enumeration")
    t = _conditioned_vectors(q, n * m, a)
    hit = (block_sums(t, pi, n, m, q) == np.asarray(xs)).all(axis=1)
    return Fraction(int(hit.sum()), len(t))


def second_moment_series(n: int, m: int, q: int, kmax: int | None = None) -> float:
    """Upper bound on E[Y_pi Y_pi'] summed over deficits k = 1..kmax (default 2n)."""
    kmax = 2 * n if kmax is None else kmax
    r = n**2 / (n / 2) ** (m - 2)
    return sum(q**k / q ** (2 * n - 1) * r ** ((k - 1) / 2) for k in range(1, kmax + 1))


@dataclass(frozen=True)
class MomentRecord:
    mu: Fraction
    empirical_second_moment_ratio: float
    stderr: float
    bound: float
    k_tail: Mapping[int, float]
    samples: int

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")

    @property
    def passed(self) -> bool:
        return self.empirical_second_moment_ratio <= self.bound + 5 * self.stderr


def sample_permutations(rng: np.random.Generator, count: int, size: int) -> np.ndarray:
    return rng.permuted(np.tile(np.arange(size, dtype=np.int64), (count, 1)), axis=1)


def sample_conditioned_uniform(
    rng: np.random.Generator, count: int, length: int, a: int, q: int
) -> np.ndarray:
    prefix = rng.integers(0, q, size=(count, length - 1), dtype=np.int64)
    last = (a - prefix.sum(axis=1)) % q
    return np.concatenate([prefix, last[:, None]], axis=1)


def second_moment_experiment(
    params: ProtocolParams,
    samples: int,
    seed: int,
    x: Sequence[int] | None = None,
    same_perm: bool = False,
    chunk: int = 4096,
) -> MomentRecord:
    """Monte-Carlo estimate of q^(2n-1) E[Y_{t,pi} Y_{t,pi'}] against its series bound.

    Also tallies the rank deficits of the sampled permutation pairs. With
    ``same_perm`` the pair is forced equal, which pins the estimate to q^n.
    """
    from splitmix.linalg import batch_rank_deficits

    q, n, m = params.q.q, params.n, params.m
    if n < 3 or m < 3:
        raise ValueError(f"second-moment experiment needs n >= 3 and m >= 3, got n={n}, m={m}")
    xs = _inputs(x if x is not None else [0] * n, params)
    a = sum(xs) % q
    rng = make_rng(seed)
    hits = 0
    deficits = []
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        pi = sample_permutations(rng, b, n * m)
        pj = pi if same_perm else sample_permutations(rng, b, n * m)
        t = sample_conditioned_uniform(rng, b, n * m, a, q)
        target = np.asarray(xs)
        y1 = (block_sums(t, pi, n, m, q) == target).all(axis=1)
        y2 = (block_sums(t, pj, n, m, q) == target).all(axis=1)
        hits += int((y1 & y2).sum())
        deficits.append(batch_rank_deficits(pi, pj, n, m, q))
        done += b
    p = hits / samples
    scale = q ** (2 * n - 1)
    deficits = np.concatenate(deficits)
    k_tail = {k: float((deficits >= k).mean()) for k in range(1, 2 * n + 1)}
    return MomentRecord(
        mu=Fraction(math.factorial(n * m), q ** (n - 1)),
        empirical_second_moment_ratio=p * scale,
        stderr=math.sqrt(p * (1 - p) / samples) * scale,
        bound=second_moment_series(n, m, q) * scale,
        k_tail=k_tail,
        samples=samples,
    )

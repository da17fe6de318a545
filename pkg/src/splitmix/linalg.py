"""Random permutation-pair matrices, their rank deficit, and matching partitions.

Permutations are 0-based sequences: ``pi[j]`` is the image of position ``j``.
Party ``i`` owns positions ``m*i .. m*i + m - 1``; row ``i`` of the party
matrix indicates where those positions land.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from splitmix.ffield import FieldMatrix, as_modulus, batch_rank_mod_q, rank_mod_q
from splitmix.rng import make_rng

DEFAULT_BUDGET = 10**8


def _check_perm(pi: Sequence[int], size: int, name: str) -> tuple[int, ...]:
    pi = tuple(int(v) for v in pi)
    if sorted(pi) != list(range(size)):
        raise ValueError(f"{name} is not a bijection on range({size})")
    return pi


def party_rows(pi: Sequence[int], n: int, m: int) -> list[list[int]]:
    rows = [[0] * (n * m) for _ in range(n)]
    for j, p in enumerate(pi):
        rows[j // m][p] = 1
    return rows


@dataclass(frozen=True)
class PermutationPairMatrix:
    matrix: FieldMatrix
    pi: tuple[int, ...]
    pi_prime: tuple[int, ...]
    n: int
    m: int

    def __post_init__(self):
        M, n, m = self.matrix.entries, self.n, self.m
        if self.matrix.rows != 2 * n or self.matrix.cols != m * n:
            raise ValueError("pair matrix must be 2n x mn")
        for half in (M[:n], M[n:]):
            if any(v not in (0, 1) for row in half for v in row):
                raise ValueError("pair matrix entries must be 0/1")
            if any(sum(row) != m for row in half):
                raise ValueError("each row must hold exactly m ones")
            if [sum(col) for col in zip(*half)] != [1] * (m * n):
                raise ValueError("rows of each half must partition the columns")

    @property
    def top(self) -> FieldMatrix:
        return FieldMatrix(self.matrix.entries[: self.n], self.matrix.modulus)

    @property
    def bottom(self) -> FieldMatrix:
        return FieldMatrix(self.matrix.entries[self.n :], self.matrix.modulus)


def build_pair_matrix(
    pi: Sequence[int], pi_prime: Sequence[int], n: int, m: int, q
) -> PermutationPairMatrix:
    pi = _check_perm(pi, n * m, "pi")
    pi_prime = _check_perm(pi_prime, n * m, "pi_prime")
    rows = party_rows(pi, n, m) + party_rows(pi_prime, n, m)
    return PermutationPairMatrix(FieldMatrix.from_rows(rows, as_modulus(q)), pi, pi_prime, n, m)


def rank_deficit(M: PermutationPairMatrix) -> int:
    return 2 * M.n - rank_mod_q(M.matrix)


def batch_pair_matrices(P1: np.ndarray, P2: np.ndarray, n: int, m: int) -> np.ndarray:
    """Stack of pair matrices, shape ``(B, 2n, mn)``, from row-wise permutations."""
    B = len(P1)
    out = np.zeros((B, 2 * n, n * m), dtype=np.int64)
    owner = np.arange(n * m) // m
    rows = np.arange(B)[:, None]
    out[rows, owner[None, :], P1] = 1
    out[rows, n + owner[None, :], P2] = 1
    return out


def batch_rank_deficits(P1: np.ndarray, P2: np.ndarray, n: int, m: int, q: int) -> np.ndarray:
    return 2 * n - batch_rank_mod_q(batch_pair_matrices(P1, P2, n, m), int(q))


@dataclass(frozen=True)
class PartitionPair:
    parts: tuple[tuple[frozenset[int], frozenset[int]], ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("need at least one part")
        left = [s for s, _ in self.parts]
        right = [s for _, s in self.parts]
        for side in (left, right):
            if any(not s for s in side):
                raise ValueError("parts must be non-empty")
            union = set().union(*side)
            if sum(len(s) for s in side) != len(union) or union != set(range(len(union))):
                raise ValueError("parts must partition range(n)")
        if len(set().union(*left)) != len(set().union(*right)):
            raise ValueError("both sides must partition the same range(n)")
        if any(len(s) != len(t) for s, t in self.parts):
            raise ValueError("matched parts must have equal sizes")

    @property
    def k(self) -> int:
        return len(self.parts)


def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def set_partitions(n: int, k: int) -> Iterator[list[list[int]]]:
    """Partitions of range(n) into exactly k blocks, in restricted-growth order.

    Blocks come out ordered by their minimal element, and partitions in
    lexicographic order of their restricted-growth strings.
    """

    def rec(i: int, blocks: list[list[int]]):
        if n - i < k - len(blocks):
            return
        if i == n:
            if len(blocks) == k:
                yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        if len(blocks) < k:
            blocks.append([i])
            yield from rec(i + 1, blocks)
            blocks.pop()

    if k < 1 or k > n:
        return
    yield from rec(0, [])


def _images(pi: Sequence[int], n: int, m: int) -> list[frozenset[int]]:
    return [frozenset(pi[i * m : (i + 1) * m]) for i in range(n)]


def find_matching_partitions(
    pi: Sequence[int],
    pi_prime: Sequence[int],
    n: int,
    m: int,
    k: int,
    budget: int = DEFAULT_BUDGET,
) -> PartitionPair | None:
    """First k-part matching pair (S_j, S'_j) with pi(S_j blocks) == pi'(S'_j blocks).

    For a candidate left partition the right side is forced: S'_j must be the
    owners (under pi') of the positions covered by S_j, so only left
    partitions are enumerated.
    """
    if bell_number(n) ** 2 > budget:
        raise RuntimeError(f"partition search for n={n} exceeds the budget {budget}")
    pi = _check_perm(pi, n * m, "pi")
    pi_prime = _check_perm(pi_prime, n * m, "pi_prime")
    img = _images(pi, n, m)
    owner = {p: j // m for j, p in enumerate(pi_prime)}
    for blocks in set_partitions(n, k):
        parts = []
        for S in blocks:
            covered = frozenset().union(*(img[i] for i in S))
            S_prime = frozenset(owner[p] for p in covered)
            if len(S_prime) * m != len(covered):
                break
            parts.append((frozenset(S), S_prime))
        else:
            return PartitionPair(tuple(parts))
    return None


def certificate_holds(pair: PartitionPair, M: PermutationPairMatrix) -> bool:
    """Row-sum identity: sum of top rows in S_j equals sum of bottom rows in S'_j, every j."""
    q = M.matrix.modulus.q
    top, bottom = M.matrix.entries[: M.n], M.matrix.entries[M.n :]
    for S, S_prime in pair.parts:
        lhs = [sum(top[i][c] for i in S) % q for c in range(M.matrix.cols)]
        rhs = [sum(bottom[i][c] for i in S_prime) % q for c in range(M.matrix.cols)]
        if lhs != rhs:
            return False
    return True


def tail_bound(n: int, m: int, k: int) -> float:
    """Pr[deficit >= k] <= (n^2 / (n/2)^(m-2))^((k-1)/2)."""
    return (n**2 / (n / 2) ** (m - 2)) ** ((k - 1) / 2)


@dataclass(frozen=True)
class TailResult:
    n: int
    m: int
    q: int
    k: int
    empirical: float
    bound: float
    stderr: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + 5 * self.stderr


def sample_deficits(
    n: int, m: int, q: int, samples: int, seed: int, chunk: int = 1024
) -> np.ndarray:
    """Rank deficits of ``samples`` uniformly random permutation pairs."""
    rng = make_rng(seed)
    out = []
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        base = np.tile(np.arange(n * m, dtype=np.int64), (b, 1))
        P1 = rng.permuted(base, axis=1)
        P2 = rng.permuted(base, axis=1)
        out.append(batch_rank_deficits(P1, P2, n, m, q))
        done += b
    return np.concatenate(out)


def deficit_tail_sweep(
    n: int, m: int, q: int, ks: Sequence[int], samples: int, seed: int
) -> list[TailResult]:
    """Tail check for several k sharing one batch of sampled permutation pairs."""
    if m < 3:
        raise ValueError(f"the tail bound needs m >= 3, got m={m}")
    if samples < 1:
        raise ValueError("samples must be positive")
    if any(k < 1 for k in ks):
        raise ValueError("k must be positive")
    q = as_modulus(q).q
    defc = sample_deficits(n, m, q, samples, seed)
    results = []
    for k in ks:
        p = float((defc >= k).mean())
        results.append(
            TailResult(n, m, q, k, p, tail_bound(n, m, k), math.sqrt(p * (1 - p) / samples), samples)
        )
    return results


def deficit_tail_experiment(
    n: int, m: int, q: int, k: int, samples: int, seed: int
) -> TailResult:
    return deficit_tail_sweep(n, m, q, [k], samples, seed)[0]


def multinomial(counts: Sequence[int]) -> int:
    out, acc = 1, 0
    for c in counts:
        acc += c
        out *= math.comb(acc, c)
    return out


@dataclass(frozen=True)
class FactsCheck:
    """Both sides of the two multinomial inequalities (lhs >= rhs expected).

    The floor-of-half-parts inequality is only claimed for positive parts, so
    ``fact_a2`` entries are ``None`` when a tuple has a zero.
    """

    fact_a1: tuple[int, int]
    fact_a2: tuple[int, Fraction] | None
    fact_a2_prime: tuple[int, Fraction] | None

    @property
    def holds(self) -> bool:
        pairs = [self.fact_a1, self.fact_a2, self.fact_a2_prime]
        return all(lhs >= rhs for lhs, rhs in (p for p in pairs if p is not None))


def _fact_a2(a: Sequence[int]) -> tuple[int, Fraction] | None:
    if any(v <= 0 for v in a):
        return None
    return multinomial(a), Fraction(sum(a), 2) ** (len(a) // 2)


def multinomial_facts_check(a: Sequence[int], a_prime: Sequence[int]) -> FactsCheck:
    if len(a) != len(a_prime) or not a:
        raise ValueError("need two non-empty tuples of equal length")
    if any(v < 0 for v in itertools.chain(a, a_prime)):
        raise ValueError("entries must be non-negative")
    lhs = multinomial([u + v for u, v in zip(a, a_prime)])
    rhs = multinomial(a) * multinomial(a_prime)
    return FactsCheck((lhs, rhs), _fact_a2(a), _fact_a2(a_prime))


def facts_trials(
    trials: int, seed: int, max_entry: int = 12, max_parts: int = 6
) -> tuple[int, list[tuple[tuple[int, ...], tuple[int, ...]]]]:
    """Random positive tuples checked against both facts; returns (checked, violations)."""
    rng = make_rng(seed)
    violations = []
    for _ in range(trials):
        k = int(rng.integers(1, max_parts + 1))
        a = tuple(int(v) for v in rng.integers(1, max_entry + 1, size=k))
        b = tuple(int(v) for v in rng.integers(1, max_entry + 1, size=k))
        if not multinomial_facts_check(a, b).holds:
            violations.append((a, b))
    return trials, violations


@dataclass(frozen=True)
class Lemma2Report:
    n: int
    m: int
    q: int
    pairs_checked: int
    distinct_matrices: int
    exceptions: int
    converse_failures: int
    equivalence_failures: int


def lemma2_exhaustive(n: int, m: int, q: int) -> Lemma2Report:
    """Check deficit >= k  =>  a k-part matching exists, over every permutation pair.

    The pair matrix depends only on the ordered image blocks of each
    permutation, so results are memoised per distinct matrix while every one
    of the (mn)!^2 pairs is still visited.  Also counts failures of the
    converse (a k-matching forces deficit >= k) and of exact equality between
    the deficit and the largest matching size.
    """
    q = as_modulus(q).q
    perms = list(itertools.permutations(range(n * m)))
    key_of: dict[tuple, int] = {}
    reps: list[tuple[int, ...]] = []
    perm_key = []
    for p in perms:
        key = tuple(_images(p, n, m))
        if key not in key_of:
            key_of[key] = len(reps)
            reps.append(p)
        perm_key.append(key_of[key])
    K = len(reps)
    P1 = np.array([reps[i] for i in range(K) for _ in range(K)], dtype=np.int64)
    P2 = np.array([reps[j] for _ in range(K) for j in range(K)], dtype=np.int64)
    defc = batch_rank_deficits(P1, P2, n, m, q).reshape(K, K)

    bad = np.zeros((K, K), dtype=bool)
    converse_bad = np.zeros((K, K), dtype=bool)
    equiv_bad = np.zeros((K, K), dtype=bool)
    for i in range(K):
        for j in range(K):
            best = 0
            for k in range(1, n + 1):
                pair = find_matching_partitions(reps[i], reps[j], n, m, k)
                if pair is None:
                    if k <= defc[i, j]:
                        bad[i, j] = True
                    continue
                best = k
                M = build_pair_matrix(reps[i], reps[j], n, m, q)
                if not certificate_holds(pair, M) or rank_deficit(M) < k:
                    converse_bad[i, j] = True
            equiv_bad[i, j] = best != defc[i, j]

    keys = np.array(perm_key)
    counts = np.bincount(keys, minlength=K)
    weight = np.outer(counts, counts)
    return Lemma2Report(
        n=n,
        m=m,
        q=q,
        pairs_checked=int(weight.sum()),
        distinct_matrices=K * K,
        exceptions=int(weight[bad].sum()),
        converse_failures=int(weight[converse_bad].sum()),
        equivalence_failures=int(weight[equiv_bad].sum()),
    )

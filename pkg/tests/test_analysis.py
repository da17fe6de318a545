import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from splitmix.analysis import (
    BudgetExceeded,
    DistributionTable,
    exact_transcript_distribution,
    first_moment_check,
    mc_advantage,
    second_moment_experiment,
    second_moment_series,
    security_check,
    statistical_distance,
    uniform_conditioned_distribution,
)
from splitmix.protocol import ProtocolParams, run_protocol


def brute_R(x, m, q):
    """Enumerate every ordered share choice of every party."""
    counts = Counter()
    per_party = []
    for xi in x:
        opts = []
        for prefix in itertools.product(range(q), repeat=m - 1):
            opts.append(prefix + ((xi - sum(prefix)) % q,))
        per_party.append(opts)
    for choice in itertools.product(*per_party):
        counts[tuple(sorted(v for sh in choice for v in sh))] += 1
    total = sum(counts.values())
    return {k: Fraction(c, total) for k, c in counts.items()}


def brute_U(a, length, q):
    counts = Counter(
        tuple(sorted(t)) for t in itertools.product(range(q), repeat=length) if sum(t) % q == a
    )
    total = sum(counts.values())
    return {k: Fraction(c, total) for k, c in counts.items()}


def brute_sd(d1, d2):
    return sum(abs(d1.get(k, 0) - d2.get(k, 0)) for k in set(d1) | set(d2)) / 2


small_instances = st.tuples(st.integers(1, 3), st.integers(1, 3), st.sampled_from([2, 3])).filter(
    lambda t: t[0] * t[1] <= 7
)


@settings(max_examples=40, deadline=None)
@given(small_instances, st.data())
def test_exact_R_matches_brute_force(inst, data):
    n, m, q = inst
    x = tuple(data.draw(st.integers(0, q - 1)) for _ in range(n))
    table = exact_transcript_distribution(x, ProtocolParams(n, m, q))
    assert table.as_dict() == brute_R(x, m, q)


@settings(max_examples=40, deadline=None)
@given(small_instances, st.data())
def test_exact_U_matches_brute_force(inst, data):
    n, m, q = inst
    a = data.draw(st.integers(0, q - 1))
    table = uniform_conditioned_distribution(a, ProtocolParams(n, m, q))
    assert table.as_dict() == brute_U(a, n * m, q)
    assert sum(table.probs) == 1


@settings(max_examples=40, deadline=None)
@given(small_instances, st.data())
def test_sd_to_uniform_in_unit_interval(inst, data):
    n, m, q = inst
    x = tuple(data.draw(st.integers(0, q - 1)) for _ in range(n))
    p = ProtocolParams(n, m, q)
    sd = statistical_distance(exact_transcript_distribution(x, p), uniform_conditioned_distribution(sum(x) % q, p))
    assert 0 <= sd <= 1
    if n * m == 1:
        assert sd == 0


def test_R_examples():
    p = ProtocolParams(1, 1, 5)
    assert exact_transcript_distribution((3,), p).as_dict() == {(3,): 1}
    p = ProtocolParams(2, 1, 2)
    assert exact_transcript_distribution((0, 1), p).as_dict() == {(0, 1): 1}
    p = ProtocolParams(2, 2, 2)
    want = {(0, 0, 0, 0): Fraction(1, 4), (0, 0, 1, 1): Fraction(1, 2), (1, 1, 1, 1): Fraction(1, 4)}
    assert exact_transcript_distribution((0, 0), p).as_dict() == want


def test_U_examples():
    assert uniform_conditioned_distribution(1, ProtocolParams(1, 1, 3)).as_dict() == {(1,): 1}
    got = uniform_conditioned_distribution(0, ProtocolParams(1, 2, 2)).as_dict()
    assert got == {(0, 0): Fraction(1, 2), (1, 1): Fraction(1, 2)}


def test_sd_examples():
    A, B = (0,), (1,)
    d1 = DistributionTable.from_mapping({A: Fraction(1, 2), B: Fraction(1, 2)})
    d2 = DistributionTable.from_mapping({A: Fraction(1, 4), B: Fraction(3, 4)})
    assert statistical_distance(d1, d2) == Fraction(1, 4)
    assert statistical_distance(d1, d1) == 0
    assert statistical_distance(
        DistributionTable.from_mapping({A: 1}), DistributionTable.from_mapping({B: 1})
    ) == 1


def test_distribution_table_invariants():
    with pytest.raises(ValueError):
        DistributionTable(((0,), (0,)), (Fraction(1, 2), Fraction(1, 2)))
    with pytest.raises(ValueError):
        DistributionTable(((1, 0),), (Fraction(1),))
    with pytest.raises(ValueError):
        DistributionTable(((0,),), (Fraction(1, 2),))
    t = exact_transcript_distribution((1, 2), ProtocolParams(2, 2, 3))
    assert DistributionTable.from_dict(t.to_dict()).as_dict() == t.as_dict()


def test_budget_enforced():
    with pytest.raises(BudgetExceeded):
        exact_transcript_distribution((0,) * 4, ProtocolParams(4, 3, 5), budget=100)
    with pytest.raises(BudgetExceeded):
        uniform_conditioned_distribution(0, ProtocolParams(4, 3, 5), budget=100)


def test_security_check_examples():
    p = ProtocolParams(2, 1, 5)
    assert security_check((0, 0), (1, 4), p).sd == 1
    assert security_check((2, 3), (2, 3), p).sd == 0
    p = ProtocolParams(2, 2, 2)
    chk = security_check((0, 0), (1, 1), p)
    assert chk.sd == brute_sd(brute_R((0, 0), 2, 2), brute_R((1, 1), 2, 2))
    assert chk.sd <= chk.certified_bound
    with pytest.raises(ValueError):
        security_check((0, 0), (0, 1), p)


def test_sd_decreases_with_m():
    vals = [
        statistical_distance(
            exact_transcript_distribution((1, 1, 0), ProtocolParams(3, m, 2)),
            uniform_conditioned_distribution(0, ProtocolParams(3, m, 2)),
        )
        for m in (2, 3, 4, 5)
    ]
    # frozen from the brute-force enumerator above
    assert vals == [Fraction(1, 16), Fraction(9, 256), Fraction(17, 1024), Fraction(43, 8192)]
    assert vals[:2] == [brute_sd(brute_R((1, 1, 0), m, 2), brute_U(0, 3 * m, 2)) for m in (2, 3)]


def test_chi_square_against_protocol_samples():
    n, m, q = 2, 2, 3
    x = (1, 2)
    params = ProtocolParams(n, m, q)
    table = exact_transcript_distribution(x, params)
    rng = np.random.Generator(np.random.Philox(5))
    counts = Counter(run_protocol(x, params, rng).as_tuple() for _ in range(100000))
    observed = [counts.get(s, 0) for s in table.support]
    assert sum(observed) == 100000
    expected = [float(p) * 100000 for p in table.probs]
    assert chisquare(observed, expected).pvalue > 1e-3


def test_first_moment_examples():
    assert first_moment_check((0,), (2,), 2, ProtocolParams(1, 1, 3)) == 1
    for pi in itertools.permutations(range(2)):
        assert first_moment_check(pi, (1, 0), 1, ProtocolParams(2, 1, 2)) == Fraction(1, 2)
    assert first_moment_check((0, 1, 2, 3), (1, 2), 0, ProtocolParams(2, 2, 3)) == Fraction(1, 3)


def test_first_moment_brute_force():
    # Independent count: tuples t with block sums equal to x under pi.
    n, m, q = 2, 2, 3
    x, a = (2, 2), 1
    for pi in itertools.permutations(range(n * m)):
        hits = total = 0
        for t in itertools.product(range(q), repeat=n * m):
            if sum(t) % q != a:
                continue
            total += 1
            hits += all(sum(t[pi[i * m + j]] for j in range(m)) % q == x[i] for i in range(n))
        assert first_moment_check(pi, x, a, ProtocolParams(n, m, q)) == Fraction(hits, total)


def test_series_first_term():
    n, m, q = 3, 3, 2
    r = n**2 / (n / 2) ** (m - 2)
    assert second_moment_series(n, m, q, kmax=1) == pytest.approx(q ** -(2 * n - 2))
    assert second_moment_series(n, m, q) == pytest.approx(sum(q**k / q ** (2 * n - 1) * r ** ((k - 1) / 2) for k in range(1, 2 * n + 1)))


def test_second_moment_experiment():
    rec = second_moment_experiment(ProtocolParams(3, 3, 2), 20000, seed=3)
    assert rec.passed
    assert rec.mu == Fraction(362880, 4)
    assert rec.k_tail[1] == 1.0


def test_second_moment_same_permutation():
    # pi = pi' makes Y idempotent: E[Y^2] q^(2n-1) = q^(n) exactly in expectation.
    n, m, q = 3, 3, 2
    rec = second_moment_experiment(ProtocolParams(n, m, q), 20000, seed=4, same_perm=True)
    assert abs(rec.empirical_second_moment_ratio - q**n) <= 5 * rec.stderr


def test_second_moment_requires_sizes():
    with pytest.raises(ValueError):
        second_moment_experiment(ProtocolParams(2, 3, 2), 10, seed=0)


def test_mc_advantage_examples():
    params = ProtocolParams(2, 1, 2)
    s0 = lambda rng: run_protocol((0, 0), params, rng)
    s1 = lambda rng: run_protocol((1, 1), params, rng)
    est = mc_advantage(s0, s1, lambda t, rng: t.as_tuple() == (0, 0), 500, seed=1)
    assert est.estimate == 1
    est = mc_advantage(s0, s1, lambda t, rng: True, 500, seed=1)
    assert est.estimate == 0
    p = ProtocolParams(3, 2, 5)
    s = lambda rng: run_protocol((1, 2, 3), p, rng)
    est = mc_advantage(s, s, lambda t, rng: t.messages[0] == 0, 4000, seed=2)
    assert abs(est.estimate) <= 5 * est.stderr

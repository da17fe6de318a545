import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import isprime, nextprime

from splitmix.ffield import (
    FieldElement,
    FieldMatrix,
    ModulusMismatch,
    PrimeModulus,
    batch_rank_mod_q,
    field_arith,
    is_prime,
    next_prime_above,
    rank_mod_q,
    vector_sum,
)

SMALL_PRIMES = [2, 3, 5, 7, 11, 101]


def span_size(rows, q):
    """Brute-force size of the row space: q^rank."""
    cols = len(rows[0])
    seen = set()
    for coeffs in itertools.product(range(q), repeat=len(rows)):
        seen.add(tuple(sum(c * r[j] for c, r in zip(coeffs, rows)) % q for j in range(cols)))
    return len(seen)


def test_primality_agrees_with_sympy():
    for n in range(-3, 3000):
        assert is_prime(n) == isprime(n)
    for n in [2**61 - 1, 2**61 + 1, 1000000007, 561, 3215031751]:
        assert is_prime(n) == isprime(n)


def test_non_prime_modulus_rejected():
    with pytest.raises(ValueError):
        PrimeModulus(4)
    with pytest.raises(TypeError):
        PrimeModulus(5.0)


@pytest.mark.parametrize("x", [1, 2, 2000, 63245, 10**9])
def test_next_prime_above(x):
    assert next_prime_above(x).q == nextprime(x)


def test_mixed_moduli_raise():
    a, b = PrimeModulus(5)(1), PrimeModulus(7)(1)
    with pytest.raises(ModulusMismatch):
        a + b
    with pytest.raises(ModulusMismatch):
        field_arith(a, b, "mul")


def test_zero_has_no_inverse():
    with pytest.raises(ZeroDivisionError):
        PrimeModulus(7)(0).inverse()


@given(st.sampled_from(SMALL_PRIMES), st.integers(), st.integers(), st.integers())
def test_field_axioms(q, a, b, c):
    F = PrimeModulus(q)
    x, y, z = F(a), F(b), F(c)
    assert (x + y) + z == x + (y + z)
    assert x * (y + z) == x * y + x * z
    assert x + (-x) == F(0)
    assert x - y == x + (-y)
    if x.value:
        assert x * x.inverse() == F(1)
        assert (y / x) * x == y
    assert int(field_arith(x, y, "add")) == (a + b) % q


@settings(max_examples=200)
@given(
    st.sampled_from([2, 3, 5]),
    st.integers(1, 4),
    st.integers(1, 4),
    st.data(),
)
def test_rank_matches_row_space_enumeration(q, r, c, data):
    rows = [[data.draw(st.integers(0, q - 1)) for _ in range(c)] for _ in range(r)]
    rank = rank_mod_q(FieldMatrix.from_rows(rows, q))
    assert q**rank == span_size(rows, q)
    assert rank == rank_mod_q(FieldMatrix.from_rows(rows, q).transpose())


@settings(max_examples=50)
@given(st.sampled_from([2, 3, 7, 101]), st.integers(1, 6), st.integers(1, 9), st.integers(0, 2**32))
def test_batch_rank_matches_scalar_rank(q, r, c, seed):
    rng = np.random.default_rng(seed)
    mats = rng.integers(0, q, size=(12, r, c))
    # force some rank-deficient members
    mats[0] = 0
    if r > 1:
        mats[1, -1] = (2 * mats[1, 0]) % q
    got = batch_rank_mod_q(mats, q)
    want = [rank_mod_q(FieldMatrix.from_rows(m.tolist(), q)) for m in mats]
    assert got.tolist() == want


def test_batch_rank_large_modulus_falls_back():
    q = 2**31 + 11
    assert is_prime(q)
    mats = np.array([[[1, 2], [2, 4]], [[1, 0], [0, 1]]])
    assert batch_rank_mod_q(mats, q).tolist() == [1, 2]


def test_identity_and_zero_ranks():
    assert rank_mod_q(FieldMatrix.identity(5, 3)) == 5
    assert rank_mod_q(FieldMatrix.zeros(3, 4, 3)) == 0


def test_rank_depends_on_characteristic():
    # determinant 2: singular over F_2 only
    M = [[1, 1], [1, -1]]
    assert rank_mod_q(FieldMatrix.from_rows(M, 2)) == 1
    assert rank_mod_q(FieldMatrix.from_rows(M, 3)) == 2


def test_matrix_access():
    M = FieldMatrix.from_rows([[1, 6], [8, 3]], 7)
    assert M[1, 0] == FieldElement(1, PrimeModulus(7))
    assert M.to_numpy().tolist() == [[1, 6], [1, 3]]
    assert (M.rows, M.cols) == (2, 2)


def test_vector_sum():
    assert vector_sum([3, 4, 5], 7) == 5

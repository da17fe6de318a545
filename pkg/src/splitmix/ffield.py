"""Exact arithmetic and linear algebra over prime fields F_q."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Deterministic Miller-Rabin witnesses; correct for every n < 3.3e24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MR_LIMIT = 3317044064679887385961981


class ModulusMismatch(ValueError):
    """Raised when two field objects over different moduli are combined."""


@functools.lru_cache(maxsize=4096)
def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    if n >= _MR_LIMIT:
        raise ValueError(f"primality of {n} is outside the deterministic range")
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeModulus:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, (int, np.integer)) or isinstance(self.q, bool):
            raise TypeError(f"field order must be an integer, got {self.q!r}")
        object.__setattr__(self, "q", int(self.q))
        if not is_prime(self.q):
            raise ValueError(f"field order {self.q} is not prime")

    def __int__(self) -> int:
        return self.q

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(int(value) % self.q, self)

    @property
    def bits(self) -> int:
        """Bits needed to write one element, ceil(log2 q)."""
        return (self.q - 1).bit_length()


def as_modulus(q: "int | PrimeModulus") -> PrimeModulus:
    return q if isinstance(q, PrimeModulus) else PrimeModulus(int(q))


def next_prime_above(x: int) -> PrimeModulus:
    """Least prime strictly greater than ``x``."""
    if x < 1:
        raise ValueError(f"next_prime_above needs x >= 1, got {x}")
    p = x + 1
    while not is_prime(p):
        p += 1
    return PrimeModulus(p)


@dataclass(frozen=True)
class FieldElement:
    value: int
    modulus: PrimeModulus

    def __post_init__(self):
        if not 0 <= self.value < self.modulus.q:
            raise ValueError(f"{self.value} is not reduced modulo {self.modulus.q}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.modulus != self.modulus:
                raise ModulusMismatch(
                    f"cannot combine F_{self.modulus.q} and F_{other.modulus.q}"
                )
            return other.value
        if isinstance(other, (int, np.integer)) and not isinstance(other, bool):
            return int(other)
        return NotImplemented

    def _wrap(self, v: int) -> "FieldElement":
        return FieldElement(v % self.modulus.q, self.modulus)

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.value)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("zero has no inverse in a field")
        return self._wrap(pow(self.value, -1, self.modulus.q))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * self._wrap(o).inverse()

    def __int__(self) -> int:
        return self.value

    def __index__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"{self.value} (mod {self.modulus.q})"


def field_arith(a: FieldElement, b: FieldElement | None, op: str) -> FieldElement:
    """Dispatch one of ``add, sub, mul, neg, inv``; unary ops ignore ``b``."""
    if op == "neg":
        return -a
    if op == "inv":
        return a.inverse()
    if b is None:
        raise ValueError(f"binary op {op!r} needs two operands")
    if a.modulus != b.modulus:
        raise ModulusMismatch(f"cannot combine F_{a.modulus.q} and F_{b.modulus.q}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown field op {op!r}")


@dataclass(frozen=True)
class FieldMatrix:
    """Dense matrix over F_q; entries are stored as reduced Python ints."""

    entries: tuple[tuple[int, ...], ...]
    modulus: PrimeModulus

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[int]], q: "int | PrimeModulus") -> "FieldMatrix":
        mod = as_modulus(q)
        entries = tuple(tuple(int(v) % mod.q for v in row) for row in rows)
        if len({len(r) for r in entries}) > 1:
            raise ValueError("ragged rows")
        return cls(entries, mod)

    @classmethod
    def zeros(cls, rows: int, cols: int, q) -> "FieldMatrix":
        return cls.from_rows([[0] * cols for _ in range(rows)], q)

    @classmethod
    def identity(cls, n: int, q) -> "FieldMatrix":
        return cls.from_rows([[int(i == j) for j in range(n)] for i in range(n)], q)

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def __getitem__(self, ij: tuple[int, int]) -> FieldElement:
        i, j = ij
        return FieldElement(self.entries[i][j], self.modulus)

    def transpose(self) -> "FieldMatrix":
        return FieldMatrix(tuple(zip(*self.entries)), self.modulus)

    def to_numpy(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(self.rows, self.cols)


def _rank_rows(rows: list[list[int]], q: int) -> int:
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = pow(rows[rank][c], -1, q)
        prow = [v * inv % q for v in rows[rank]]
        rows[rank] = prow
        for r in range(len(rows)):
            if r != rank and rows[r][c]:
                f = rows[r][c]
                rows[r] = [(v - f * p) % q for v, p in zip(rows[r], prow)]
        rank += 1
        if rank == len(rows):
            break
    return rank


def rank_mod_q(M: FieldMatrix) -> int:
    """Rank over F_q by Gauss-Jordan elimination with modular inverses."""
    return _rank_rows([list(r) for r in M.entries], M.modulus.q)


@functools.lru_cache(maxsize=64)
def _inverse_lookup(q: int) -> np.ndarray:
    table = np.zeros(q, dtype=np.int64)
    table[1:] = [pow(v, -1, q) for v in range(1, q)]
    return table


def _inverse_table(values: np.ndarray, q: int) -> np.ndarray:
    if q <= 1 << 16:
        return _inverse_lookup(q)[values]
    return np.array([pow(int(v), -1, q) for v in values], dtype=np.int64)


def batch_rank_mod_q(mats: np.ndarray, q: int) -> np.ndarray:
    """Ranks over F_q of a stack of matrices with shape ``(B, rows, cols)``.

    Vectorised across the batch; requires q < 2**31 so that products fit in int64.
    """
    q = int(q)
    if q >= 1 << 31:
        return np.array(
            [rank_mod_q(FieldMatrix.from_rows(m.tolist(), q)) for m in mats], dtype=np.int64
        )
    A = np.asarray(mats, dtype=np.int64) % q
    if A.ndim != 3:
        raise ValueError(f"expected a (B, rows, cols) stack, got shape {A.shape}")
    if A.shape[2] > A.shape[1]:
        # Fewer pivot columns to sweep; rank is transpose-invariant.
        A = np.ascontiguousarray(A.transpose(0, 2, 1))
    B, nr, nc = A.shape
    rank = np.zeros(B, dtype=np.int64)
    used = np.zeros((B, nr), dtype=bool)
    for c in range(nc):
        cand = (A[:, :, c] != 0) & ~used
        has = cand.any(axis=1)
        if not has.any():
            continue
        b = np.flatnonzero(has)
        p = cand[b].argmax(axis=1)
        inv = _inverse_table(A[b, p, c], q)
        prow = A[b, p, :] * inv[:, None] % q
        sub = A[b]
        factors = sub[:, :, c].copy()
        factors[np.arange(len(b)), p] = 0
        sub = (sub - factors[:, :, None] * prow[:, None, :]) % q
        sub[np.arange(len(b)), p, :] = prow
        A[b] = sub
        used[b, p] = True
        rank[b] += 1
    return rank


def vector_sum(values: Sequence[int], q: int) -> int:
    return sum(int(v) for v in values) % q

"""The split-and-mix aggregation protocol: encoder, shuffler, analyzer.

Each party splits its input into ``m`` additive shares over F_q (``m - 1``
uniform, one correcting) and the shuffler releases the multiset of all ``n*m``
shares. Transcripts are kept in canonical (sorted) form; since the shuffled
order is uniform given the multiset, nothing distributional is lost.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from splitmix.ffield import FieldElement, PrimeModulus, as_modulus


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    m: int
    q: PrimeModulus
    gamma: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", as_modulus(self.q))
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.gamma is None and self.sigma is not None:
            object.__setattr__(self, "gamma", 2.0 ** (-self.sigma - 1))
        if self.gamma is not None and not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")

    def element(self, v: int) -> FieldElement:
        return self.q(v)


def _exact_sum(arr: np.ndarray, q: int) -> int:
    # int64 accumulation is exact while len(arr) * q < 2**63.
    if q < 1 << 31 and len(arr) < 1 << 31:
        return int(arr.sum())
    return int(arr.sum(dtype=object))


def _frozen(arr) -> np.ndarray:
    a = np.array(arr, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ShareVector:
    shares: np.ndarray
    declared_input: FieldElement

    def __post_init__(self):
        object.__setattr__(self, "shares", _frozen(self.shares))
        q = self.declared_input.modulus.q
        if self.shares.ndim != 1 or len(self.shares) < 1:
            raise ValueError("a share vector needs at least one share")
        if ((self.shares < 0) | (self.shares >= q)).any():
            raise ValueError(f"shares must be reduced modulo {q}")
        if _exact_sum(self.shares, q) % q != self.declared_input.value:
            raise ValueError("shares do not sum to the declared input")

    @property
    def modulus(self) -> PrimeModulus:
        return self.declared_input.modulus

    @property
    def m(self) -> int:
        return len(self.shares)

    def elements(self) -> list[FieldElement]:
        return [self.modulus(int(v)) for v in self.shares]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShareVector):
            return NotImplemented
        return self.declared_input == other.declared_input and np.array_equal(
            self.shares, other.shares
        )

    def __hash__(self) -> int:
        return hash((self.declared_input, self.shares.tobytes()))


@dataclass(frozen=True, eq=False)
class Transcript:
    """Multiset of all shuffled messages, stored in non-decreasing order."""

    messages: np.ndarray
    params: ProtocolParams

    def __post_init__(self):
        msgs = np.array(self.messages, dtype=np.int64)
        if msgs.ndim != 1:
            raise ValueError("messages must be one-dimensional")
        if len(msgs) != self.params.n * self.params.m:
            raise ValueError(
                f"expected {self.params.n * self.params.m} messages, got {len(msgs)}"
            )
        if len(msgs) and (msgs.min() < 0 or msgs.max() >= self.params.q.q):
            raise ValueError("messages must be reduced modulo q")
        if len(msgs) > 1 and (np.diff(msgs) < 0).any():
            raise ValueError("transcript messages must be in canonical (sorted) order")
        object.__setattr__(self, "messages", _frozen(msgs))

    @classmethod
    def from_messages(cls, messages: Iterable[int], params: ProtocolParams) -> "Transcript":
        if not isinstance(messages, np.ndarray):
            messages = np.fromiter((int(v) for v in messages), dtype=np.int64)
        return cls(np.sort(messages.astype(np.int64)), params)

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.messages)

    def elements(self) -> list[FieldElement]:
        return [self.params.q(int(v)) for v in self.messages]

    def to_dict(self) -> dict:
        return {
            "q": self.params.q.q,
            "n": self.params.n,
            "m": self.params.m,
            "messages": [int(v) for v in self.messages],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: Mapping) -> "Transcript":
        params = ProtocolParams(n=int(obj["n"]), m=int(obj["m"]), q=int(obj["q"]))
        return cls(np.asarray(obj["messages"], dtype=np.int64), params)

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Transcript):
            return NotImplemented
        p, o = self.params, other.params
        return (p.n, p.m, p.q) == (o.n, o.m, o.q) and np.array_equal(
            self.messages, other.messages
        )

    def __hash__(self) -> int:
        p = self.params
        return hash((p.n, p.m, p.q.q, self.messages.tobytes()))


@dataclass(frozen=True)
class CorruptionView:
    honest_transcript: Transcript
    corrupted_shares: Mapping[int, ShareVector] = field(default_factory=dict)


def encode(x: FieldElement, m: int, rng: np.random.Generator) -> ShareVector:
    """Split ``x`` into ``m`` shares: ``m - 1`` uniform draws plus a correcting share."""
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    q = x.modulus.q
    prefix = rng.integers(0, q, size=m - 1, dtype=np.int64)
    last = (x.value - _exact_sum(prefix, q)) % q
    return ShareVector(np.append(prefix, last), x)


def encode_many(xs: Sequence[int], m: int, q: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised encoder for many parties; row ``i`` holds the shares of ``xs[i]``."""
    q = int(q)
    xs = np.asarray(xs, dtype=np.int64) % q
    prefix = rng.integers(0, q, size=(len(xs), m - 1), dtype=np.int64)
    if q < 1 << 31 and m < 1 << 31:
        last = (xs - prefix.sum(axis=1)) % q
    else:
        last = np.array(
            [(int(x) - int(row.sum(dtype=object))) % q for x, row in zip(xs, prefix)],
            dtype=np.int64,
        )
    return np.concatenate([prefix, last[:, None]], axis=1)


def _check_share_vectors(share_vectors: Sequence[ShareVector]) -> tuple[PrimeModulus, int]:
    if not share_vectors:
        raise ValueError("need at least one party")
    mod, m = share_vectors[0].modulus, share_vectors[0].m
    for sv in share_vectors:
        if sv.modulus != mod:
            raise ValueError("share vectors over different moduli")
        if sv.m != m:
            raise ValueError("share vectors of different lengths")
    return mod, m


def shuffle_tuple(share_vectors: Sequence[ShareVector], rng: np.random.Generator) -> np.ndarray:
    """The shuffler's ordered output: all shares under a uniform random permutation."""
    _check_share_vectors(share_vectors)
    flat = np.concatenate([sv.shares for sv in share_vectors])
    return flat[rng.permutation(len(flat))]


def shuffle(
    share_vectors: Sequence[ShareVector],
    rng: np.random.Generator,
    params: ProtocolParams | None = None,
) -> Transcript:
    mod, m = _check_share_vectors(share_vectors)
    if params is None:
        params = ProtocolParams(n=len(share_vectors), m=m, q=mod)
    elif (params.n, params.m, params.q) != (len(share_vectors), m, mod):
        raise ValueError("params disagree with the supplied share vectors")
    return Transcript.from_messages(shuffle_tuple(share_vectors, rng), params)


def analyze(t: Transcript) -> FieldElement:
    q = t.params.q
    return q(_exact_sum(t.messages, q.q))


def run_protocol(
    inputs: Sequence[int], params: ProtocolParams, rng: np.random.Generator
) -> Transcript:
    """encode + shuffle for every party, vectorised."""
    if len(inputs) != params.n:
        raise ValueError(f"expected {params.n} inputs, got {len(inputs)}")
    shares = encode_many([int(x) for x in inputs], params.m, params.q.q, rng)
    flat = shares.ravel()
    return Transcript.from_messages(flat[rng.permutation(len(flat))], params)


def required_messages(n: int, q: "int | PrimeModulus", gamma: float) -> int:
    """Messages per party certified by the proof constants: 4 + ceil(100 log_{n/2}(q/gamma))."""
    if n <= 2:
        raise ValueError(f"required_messages needs n >= 3 so that n/2 > 1, got n={n}")
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    q = int(q)
    v = 100 * math.log(q / gamma) / math.log(n / 2)
    # Snap float noise so exact powers such as 100*log_2(4) do not round up.
    if abs(v - round(v)) < 1e-7:
        v = round(v)
    return 4 + math.ceil(v)


def asymptotic_messages(n: int, q: "int | PrimeModulus", sigma: float) -> float:
    """The unscaled growth term 1 + (sigma + log q) / log n, logs base 2."""
    return 1 + (sigma + math.log2(int(q))) / math.log2(n)


def simulate_with_corruptions(
    inputs: Sequence[int | FieldElement],
    corrupted: Iterable[int],
    params: ProtocolParams,
    rng: np.random.Generator,
) -> CorruptionView:
    """Run the protocol; return what colluding parties see (honest multiset + their own shares).

    Party indices are 0-based.
    """
    n = len(inputs)
    if n != params.n:
        raise ValueError(f"expected {params.n} inputs, got {n}")
    bad = sorted(set(int(i) for i in corrupted))
    if any(not 0 <= i < n for i in bad):
        raise ValueError(f"corrupted indices must lie in [0, {n})")
    if len(bad) == n:
        raise ValueError("at least one party must stay honest")
    vectors = [encode(params.q(int(x)), params.m, rng) for x in inputs]
    honest = [vectors[i] for i in range(n) if i not in set(bad)]
    honest_params = ProtocolParams(
        n=len(honest), m=params.m, q=params.q, gamma=params.gamma, sigma=params.sigma
    )
    return CorruptionView(
        honest_transcript=shuffle(honest, rng, honest_params),
        corrupted_shares={i: vectors[i] for i in bad},
    )

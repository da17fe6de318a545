"""Seeded, counter-based random generators shared by every simulation."""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed; identical seeds give identical streams."""
    return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))


def spawn(seed: int, count: int) -> list[np.random.Generator]:
    """Independent per-worker generators derived from one seed."""
    children = np.random.SeedSequence(int(seed) & SEED_MASK).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]

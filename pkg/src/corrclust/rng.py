"""Seed derivation for reproducible trials.

Every random choice in the package goes through a numpy ``Generator`` backed
by PCG64.  Per-trial seeds are derived with SplitMix64 so that a trial's
stream depends only on ``(base seed, instance index, algorithm name, trial
index)`` and never on execution order or worker count.

Derivation (all arithmetic mod 2**64)::

    h = splitmix64(base)
    h = splitmix64(h ^ instance_index)
    h = splitmix64(h ^ fnv1a64(algorithm_name))
    h = splitmix64(h ^ trial_index)
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output step for state ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_seed(base: int, instance_index: int, algorithm: str, trial_index: int) -> int:
    h = splitmix64(base & MASK64)
    h = splitmix64(h ^ (instance_index & MASK64))
    h = splitmix64(h ^ fnv1a64(algorithm))
    return splitmix64(h ^ (trial_index & MASK64))


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator; an existing Generator is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required; pass an int or a Generator")
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))

"""Deterministic hashing and seed derivation.

Everything that must reproduce bit-for-bit across runs and platforms goes
through the two fixed integer hashes below instead of Python's randomized
``hash()``. Distribution-quality sampling (scatter darts, grid jitter) uses
``random.Random`` seeded from values derived here.
"""

from __future__ import annotations

import random

MASK64 = (1 << 64) - 1

# splitmix64 constants (Steele, Lea & Flood 2014). The finalizer is an
# avalanche mix: sequential inputs map to statistically independent outputs.
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def splitmix64(x: int) -> int:
    """One splitmix64 step: mixes a 64-bit value into a new 64-bit value."""
    x = (x + _GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & MASK64
    return h


def hash_text(text: str) -> int:
    return fnv1a64(text.encode("utf-8"))


def derive_seed(base: int, *labels: int | str) -> int:
    """Derive an independent child seed from a base seed and a label path.

    Same (base, labels) always yields the same seed; sibling labels yield
    decorrelated seeds.
    """
    h = splitmix64(base & MASK64)
    for label in labels:
        if isinstance(label, str):
            h = splitmix64(h ^ hash_text(label))
        else:
            h = splitmix64(h ^ (label & MASK64))
    return h


def rng_for(base: int, *labels: int | str) -> random.Random:
    """A ``random.Random`` seeded deterministically from a label path."""
    return random.Random(derive_seed(base, *labels))

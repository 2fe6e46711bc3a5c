"""Seed plumbing.

Every module derives its generators through ``make_rng`` so that a single
experiment seed fixes all randomness, and distinct consumers (stream
sampling, held-out draws, weight init, shuffles) sit on disjoint streams.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(*parts: int) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of (possibly negative) ints."""
    return np.random.default_rng([int(p) & _MASK64 for p in parts])


def derive_seed(*parts: int) -> int:
    """Collapse seed parts into one nonnegative int for nested configs."""
    return int(make_rng(*parts).integers(0, 2**62))

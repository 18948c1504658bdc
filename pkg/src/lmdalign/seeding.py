"""Seed plumbing shared by the trainers and the split logic."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def generator(*entropy: int) -> np.random.Generator:
    """Deterministic numpy Generator keyed by one or more integers.

    Negative values are folded into the unsigned 64-bit range so any Python
    int is accepted; the same entropy words always give the same stream.
    """
    if not entropy:
        raise ValueError("need at least one entropy word")
    return np.random.default_rng([int(word) & _MASK64 for word in entropy])

"""Deterministic 64-bit seed derivation for replicated experiments.

Every stream of randomness in the laboratory is derived from a single master
seed by mixing in integer labels (replica index, experiment index, attempt
counter).  Replicas are therefore reproducible individually and independent of
execution order.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1

# splitmix64 constants
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(seed: int, label: int) -> int:
    """Mix an integer label into a 64-bit seed (splitmix64 finalizer)."""
    z = (seed + (label + 1) * _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def substream(seed: int, *labels: int) -> int:
    """Derive a seed for a nested stream by mixing labels in order."""
    out = seed & _MASK
    for lab in labels:
        out = mix64(out, lab)
    return out


def rng_for(seed: int, *labels: int) -> np.random.Generator:
    """Fresh generator for the substream identified by ``labels``."""
    return np.random.default_rng(substream(seed, *labels))

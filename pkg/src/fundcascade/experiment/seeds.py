"""Deterministic child-seed derivation for sweep runs.

Each run's stream is SplitMix64(master XOR run_index * GOLDEN): the SplitMix64
output function applied to the master seed offset by the run index times the
64-bit golden-ratio constant. Distinct run indices give distinct, well-mixed
streams; the mapping is stable and documented so sweeps replay byte-for-byte.
"""
from __future__ import annotations

_MASK = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """First output of a SplitMix64 generator seeded with ``state``."""
    z = (state + GOLDEN_GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_child_seed(master_seed: int, run_index: int) -> int:
    """Child seed for one (coordinate, repetition) run."""
    if not 0 <= master_seed < 2**64:
        raise ValueError("master seed must be an unsigned 64-bit integer")
    if run_index < 0:
        raise ValueError("run index must be nonnegative")
    return splitmix64(master_seed ^ ((run_index * GOLDEN_GAMMA) & _MASK))

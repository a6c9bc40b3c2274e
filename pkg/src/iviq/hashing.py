"""Deterministic hashing primitives for the synthetic provider.

Everything here is fixed-algorithm and platform-independent: 64-bit FNV-1a
over UTF-8 bytes, and SplitMix64 for derived value streams. No libm calls,
so outputs are bit-exact everywhere IEEE-754 holds.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3

_SPLITMIX_GAMMA = 0x9E3779B97F4B1C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def fnv1a64(data: str | bytes) -> int:
    """64-bit FNV-1a hash. Strings are hashed over their UTF-8 bytes."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def splitmix64(seed: int, n: int) -> list[int]:
    """First ``n`` outputs of SplitMix64 started at ``seed``."""
    out = []
    x = seed & _MASK64
    for _ in range(n):
        x = (x + _SPLITMIX_GAMMA) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        out.append(z ^ (z >> 31))
    return out


def splitmix64_array(seed: int, n: int) -> np.ndarray:
    """Vectorized :func:`splitmix64`; same stream as the scalar version.

    SplitMix64's state advance is linear (state_i = seed + i*gamma), so the
    whole stream mixes in one shot.
    """
    with np.errstate(over="ignore"):
        states = np.uint64(seed & _MASK64) + np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_SPLITMIX_GAMMA)
        z = states
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def uniform01(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in [0, 1) using the top 53 bits."""
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_rng_seed(*parts: str | int) -> int:
    """Stable 64-bit seed from heterogeneous parts (joined with '|')."""
    return fnv1a64("|".join(str(p) for p in parts))

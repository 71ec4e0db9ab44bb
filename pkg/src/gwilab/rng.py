"""Reproducible random streams.

Every sampler takes an explicit integer seed. Independent streams (one per
replica block, per tree, ...) are derived by hashing ``(seed, index)`` with
SplitMix64 and keying a Philox counter-based generator with the result, so
the stream assigned to a block never depends on how blocks are scheduled.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(master: int, index: int) -> int:
    """Derive the 64-bit key of stream ``index`` under ``master``."""
    return splitmix64(splitmix64(master & MASK64) ^ (index & MASK64))


def generator(seed, *stream: int) -> np.random.Generator:
    """Philox generator for ``seed`` refined by the stream indices.

    A ``Generator`` passed as ``seed`` is returned unchanged, which lets
    internal loops share one stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    key = int(seed) & MASK64
    for s in stream:
        key = mix(key, s)
    return np.random.Generator(np.random.Philox(key=key))

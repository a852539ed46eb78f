"""Reproducible random substreams.

A substream is addressed by ``(seed, *key)``. The key tuple is hashed by
``numpy.random.SeedSequence`` (platform-independent) into a Philox key, so
the draws for replicate ``r`` never depend on which worker produced them
or in which order.
"""

from __future__ import annotations

import zlib

import numpy as np


def tag(name: str) -> int:
    """Stable 32-bit integer for a string label."""
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in key):
        raise ValueError("seed and key components must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def random_spd(rng: np.random.Generator, p: int) -> np.ndarray:
    """``L L' + 1e-3 p I`` with ``L`` a ``p x p`` standard normal matrix."""
    lo = rng.standard_normal((p, p))
    return lo @ lo.T + 1e-3 * p * np.eye(p)

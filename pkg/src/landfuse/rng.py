"""Seed management: one root seed fans out into named sub-streams.

Every stochastic stage (split, balance, forest, boosting, generator, ...)
draws from its own named stream so stages can be re-seeded independently and
adding randomness to one stage never shifts another.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Deterministic generator for the (seed, name) pair."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))

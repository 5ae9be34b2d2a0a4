"""Seeded random streams.

All randomness goes through Philox4x64 keyed directly with the 64-bit seed
(no SeedSequence hashing), so fixtures and RANSAC schedules are pinned by
algorithm rather than by platform defaults.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))

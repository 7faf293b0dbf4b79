"""Seedable, splittable random streams.

All stochastic code in the package draws from Philox (counter-based), so
any (seed, key) pair names the same stream on every machine and thread
layout; parallel replicates get independent substreams without
coordination.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "philox4x64"


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key); same inputs, same stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))

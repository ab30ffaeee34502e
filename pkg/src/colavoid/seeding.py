"""Counter-based RNG stream derivation.

Every stream is ``SeedSequence(master_seed, spawn_key=(domain, *counters))``.
Streams for different domains or counters are statistically independent,
so encounters and decisions can run in any order or process and still
reproduce bit for bit.
"""

from __future__ import annotations

import numpy as np

GENERATE = 1  # (GENERATE, encounter_index)
EVALUATE = 2  # (EVALUATE, crc32(policy label), master_seed, encounter_index)
PLAN = 3  # (PLAN,)


def stream(master_seed: int, domain: int, *counters: int) -> np.random.Generator:
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(domain), *map(int, counters)))
    return np.random.Generator(np.random.PCG64(seq))

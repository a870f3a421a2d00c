"""Keyed deterministic random streams.

Every stochastic choice in the lab draws from a stream keyed by a tuple such
as (run_seed, step, sequence_id). Streams are independent of each other and
of consumption order, so mask draws replay identically regardless of batch
composition. numpy's SeedSequence spawn keys provide the counter-based
construction.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for (seed, *key). Same key, same stream, always."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))

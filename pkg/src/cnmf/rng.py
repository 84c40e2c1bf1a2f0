"""Counter-based random streams with explicit domain splitting.

Every stochastic piece of the package draws from a Philox generator keyed by
a user seed plus a spawn key naming the stream, so independent stages
(instance generation, each noise kind, initializers, benchmark cells) never
share bits and results reproduce across platforms.
"""

from __future__ import annotations

import numpy as np

__all__ = ["counter_stream", "derive_seed"]

# Stream domains; keep stable, they are part of the reproducibility contract.
DOMAIN_INSTANCE = 0
DOMAIN_NOISE = 1
DOMAIN_INIT = 2
DOMAIN_BENCH = 3


def counter_stream(seed: int, *key: int) -> np.random.Generator:
    """A Philox generator for the stream named by ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A stable child seed for handing to components that take plain ints."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])

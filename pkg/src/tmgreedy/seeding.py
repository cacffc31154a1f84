"""Deterministic labeled RNG substreams.

All randomness in a run derives from one root seed. Independent purposes
(thread offsets, conflict lotteries, MIS shuffles, trial seeds, workload
generation) get their own substream via fixed integer spawn keys, so adding
draws to one consumer never perturbs another.
"""

from __future__ import annotations

import numpy as np

# Stream labels. Values are part of the reproducibility contract: changing
# them changes every seeded output.
GEN = 0       # workload generation
OFFSET = 1    # per-thread random frame offsets
LOTTERY = 2   # per-thread conflict lottery numbers
MIS = 3       # randomized MIS scan order
TRIAL = 4     # per-trial seeds in Monte Carlo sweeps


def substream(root_seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream identified by `key` under `root_seed`."""
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=tuple(key)))


def derive_seed(root_seed: int, *key: int) -> int:
    """Collapse a substream identity to a single reportable integer seed."""
    return int(np.random.SeedSequence(root_seed, spawn_key=tuple(key)).generate_state(1)[0])

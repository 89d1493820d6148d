"""Seeded random streams.

All randomness goes through Philox, a counter-based generator whose stream is
fixed by its key on every platform. Per-trial streams are keyed by
``(master_seed, trial_index)`` so results never depend on how trials are
partitioned across workers.
"""

import numpy as np

SEED_MASK = (1 << 64) - 1


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed & SEED_MASK)))


def trial_generator(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent stream for one trial of a seeded experiment."""
    ss = np.random.SeedSequence([master_seed & SEED_MASK, trial_index])
    return np.random.Generator(np.random.Philox(ss))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed for a sub-component (e.g. a schedule) from ``rng``."""
    return int(rng.integers(0, 1 << 63))

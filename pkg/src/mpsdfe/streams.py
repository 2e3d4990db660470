"""Deterministic, splittable random streams.

Every source of randomness in an estimation run derives from a single master
seed through ``numpy.random.SeedSequence`` spawn keys.  A stream is addressed
by (phase, index): settings, device shots, and sorting strings each live in
their own phase, and the index is the setting number (or trial number for
experiment replication).  Streams are therefore independent, reproducible,
and insensitive to the order or parallelism in which they are consumed.
"""

from __future__ import annotations

import numpy as np

# Phase identifiers for stream derivation.
PHASE_SETTINGS = 0
PHASE_DEVICE = 1
PHASE_SORTING = 2
PHASE_TRIALS = 3


def stream(master_seed: int, phase: int, index: int) -> np.random.Generator:
    """Return the generator for stream (phase, index) under ``master_seed``."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(phase, index))
    return np.random.default_rng(seq)


def trial_seed(master_seed: int, trial: int) -> int:
    """Derive a per-trial master seed for repeated independent runs."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(PHASE_TRIALS, trial))
    return int(seq.generate_state(1, dtype=np.uint64)[0])

"""Deterministic per-trial random streams.

Every stream is keyed by (master_seed, snr_index, trial_index, purpose), so
trials can run in any order or partition and reproduce bit-identically, and
adding a detector or purpose never perturbs existing draws.
"""

import numpy as np

# Stable purpose codes; append only, never renumber.
_PURPOSES = {
    "channel": 0,
    "data": 1,
    "phase": 2,
    "noise": 3,
    "bound_mc": 4,
    "misc": 5,
}


def trial_rng(master_seed: int, snr_index: int, trial_index: int, purpose: str) -> np.random.Generator:
    """Generator for one (snr point, trial, purpose) cell."""
    code = _PURPOSES[purpose]
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(snr_index, trial_index, code))
    return np.random.Generator(np.random.Philox(seq))

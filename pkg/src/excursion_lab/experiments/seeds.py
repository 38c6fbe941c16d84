import numpy as np


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit per-trial seed hashed from (master_seed, trial)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial),))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)

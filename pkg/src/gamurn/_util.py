import numpy as np


def derive_seed(master_seed: int, index: int) -> int:
    """64-bit seed for replicate ``index``, a pure function of ``(master_seed, index)``."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def tree_capacity(n: int) -> int:
    cap = 1
    while cap < max(n, 2):
        cap <<= 1
    return cap

"""Reproducible counter-based random streams."""

import numpy as np

MAX_SEED = 2**64 - 1


def check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed > MAX_SEED:
        raise ValueError("Seed must be between 0 and 2**64 - 1")
    return seed


def make_rng(seed, index=0):
    """Generator for stream ``index`` of ``seed``.

    Streams with distinct indices never overlap, and stream ``i`` does not
    depend on how many other streams were drawn before it.
    """
    seed = check_seed(seed)
    index = int(index)
    if index < 0:
        raise ValueError("Stream index must be non-negative")
    return np.random.Generator(np.random.Philox(key=seed + (index << 64)))

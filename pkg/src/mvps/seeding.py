"""Child-seed derivation for reproducible, replicate-parallel sampling.

A child seed is one 64-bit word produced by ``numpy.random.SeedSequence``
hashing ``master`` together with the spawn key ``(replicate, step)``.  Two
calls with the same triple always agree; distinct triples give streams that
are independent for all practical purposes.
"""

import numpy as np


def derive_seed(master, replicate=0, step=0):
    seq = np.random.SeedSequence(int(master), spawn_key=(int(replicate), int(step)))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def make_rng(master, replicate=0, step=0):
    return np.random.Generator(np.random.PCG64(derive_seed(master, replicate, step)))


def as_rng(seed_or_rng):
    """Accept an integer seed or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return make_rng(seed_or_rng)

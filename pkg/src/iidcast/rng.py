"""Seed handling.

All randomness derives from one 64-bit master seed. A per-trial stream is
``PCG64(SeedSequence(master_seed, spawn_key=(point_index, trial_index, ...)))``;
the SeedSequence hash makes streams for distinct keys independent, and any
trial can be replayed alone from its key. Simulators that need several
independent streams (arrivals vs. mobility) append a stream tag to the key.
"""
import numpy as np

MOBILITY = 0
ARRIVALS = 1


def bit_generator(seed, *key):
    return np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def generator(seed, *key):
    return np.random.Generator(bit_generator(seed, *key))


def trial_bit_generators(seed, point, n_trials):
    return [bit_generator(seed, point, t) for t in range(n_trials)]

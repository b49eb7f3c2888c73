"""Counter-based random substreams.

Every stochastic routine in the package derives its draws from a
(seed, stream, step) triple mapped onto a Philox counter block, so results
are bit-reproducible regardless of call order, chunking, or worker count.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

_MASK64 = (1 << 64) - 1
_PHILOX_SALT = 0x9E3779B97F4A7C15


class Stream(IntEnum):
    NOISE = 0        # Brownian increments of a simulation run
    INIT = 1         # initial clouds drawn inside an operation
    SUBSAMPLE = 2    # cloud subsampling for capped transport solves
    DIRECTIONS = 3   # random projection directions
    PAIRS = 4        # sampled (x, y, cloud) tuples in condition checkers
    GAUSS_SAMPLE = 5 # sampling from a GaussianLaw
    MC_QUAD = 6      # Monte Carlo quadrature nodes


def substream(seed: int, stream: int, step: int) -> np.random.Generator:
    """Generator for the block keyed by (seed, stream, step)."""
    key = np.array([int(seed) & _MASK64, _PHILOX_SALT], dtype=np.uint64)
    counter = np.array(
        [0, 0, int(stream) & _MASK64, int(step) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def derive_seed(seed: int, tag: int) -> int:
    """Child seed for auxiliary runs that must be independent of the parent
    stream (repeatability floors, reference runs)."""
    x = (int(seed) & _MASK64) ^ ((0xD1B54A32D192ED03 * (tag + 1)) & _MASK64)
    # one splitmix64 round
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & ((1 << 63) - 1)

"""Reproducible random streams.

All randomness in the package flows through Philox4x64-10, a counter-based
generator, keyed by the pair ``(seed, stream)``. Distinct key pairs give
statistically independent streams, identical pairs give identical streams on
every platform, and no global state is involved.

Stream indices are namespaced by purpose so a single user-facing seed never
reuses a stream:

* ``STREAM_SAMPLE`` (0)      -- drawing records from a finite population
* ``STREAM_COMPLETION`` (1)  -- a single imputation completion
* ``STREAM_COMPLETION + k``  -- draw ``k`` (0-based) of a multiple-imputation
  run, so an ``m=1`` run reproduces the single-completion stream exactly

Nested experiments derive fresh 64-bit seeds from a master seed and an index
path with :func:`derive_seed` (SplitMix64 mixing), then key their own streams
under the derived seed.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

STREAM_SAMPLE = 0
STREAM_COMPLETION = 1
STREAM_POPULATION = 2


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master, *path):
    """Derive a child seed from ``master`` and an index path.

    Folds each path element into the state with one SplitMix64 round, so
    ``derive_seed(s, i, j)`` and ``derive_seed(s, j, i)`` differ.
    """
    state = _splitmix64(int(master) & _MASK64)
    for part in path:
        state = _splitmix64(state ^ (int(part) & _MASK64))
    return state


def stream(seed, index):
    """A fresh Philox generator for ``(seed, index)``."""
    key = [int(seed) & _MASK64, int(index) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))

"""Deterministic RNG sub-streams.

A single root seed fans out into named streams so that toggling one
randomized feature (weight init, dropout, splits, instance sampling)
never shifts the numbers another feature sees.  Stream ids are part of
the on-disk reproducibility contract: changing them changes every
seeded artifact.
"""

from __future__ import annotations

import numpy as np

STREAM_INIT = 1
STREAM_DROPOUT = 2
STREAM_SPLITS = 3
STREAM_SAMPLING = 4


def substream(root_seed: int, stream: int, *key: int) -> np.random.Generator:
    """Generator for the (root_seed, stream, *key) sub-stream.

    Keys must be non-negative integers; typical keys are a layer index
    plus a parameter slot, or an epoch number.
    """
    if root_seed < 0:
        raise ValueError("root seed must be non-negative")
    entropy = (root_seed, stream) + tuple(key)
    return np.random.default_rng(np.random.SeedSequence(entropy))

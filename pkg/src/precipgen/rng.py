"""Seeded, splittable random streams.

Every sampling routine takes an explicit :class:`numpy.random.Generator`.
Streams are derived from a master seed and a stream index through
:class:`numpy.random.SeedSequence` spawn keys, so replicate ``k`` of an
ensemble is reproducible on its own, whatever order replicates run in.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for substream ``stream`` of master ``seed``."""
    if seed is None:
        raise ConfigError("a seed is required; there is no wall-clock default")
    seed = int(seed)
    stream = int(stream)
    if seed < 0 or stream < 0:
        raise ConfigError("seed and stream index must be nonnegative integers")
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))

"""Seedable random streams shared by sampling, data synthesis, and training.

All randomness flows through Philox, a counter-based generator with a
published algorithm, so corpora and training runs are bit-reproducible
across platforms. Independent streams for the same seed are derived from
a spawn key, never by reusing or advancing a shared generator.
"""

import numpy as np


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return an independent Philox generator for (seed, stream)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,)))
    )

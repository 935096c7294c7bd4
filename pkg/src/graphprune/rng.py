"""Seed derivation for every random draw in the package.

All randomness flows through Philox4x64-10 counter-based generators keyed
via ``numpy.random.SeedSequence``. The algorithm is named explicitly so a
seed reproduces the same streams on any platform and in any process layout;
independent streams are derived from (master seed, stream tag, indices)
rather than from draw order, which keeps parallel generation deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

PRNG_ALGORITHM = "Philox4x64-10"

# Stream tags. Never renumber: serialized artifacts depend on them.
STREAM_PHANTOM = 0
STREAM_AUGMENT = 1
STREAM_BATCH = 2
STREAM_PARAM_INIT = 3
STREAM_SPLIT = 4
STREAM_EPOCH = 5
STREAM_RESIDUAL = 6


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Philox stream for ``(seed, *path)``.

    ``seed`` and every path component must be non-negative integers.
    """
    entropy = [int(seed), *[int(p) for p in path]]
    if any(e < 0 for e in entropy):
        raise InvalidInputError(f"seed path must be non-negative, got {entropy}")
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(entropy)))

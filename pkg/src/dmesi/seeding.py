"""Labelled derivation of random streams from one master seed."""

from __future__ import annotations

import numpy as np

# Role tags used as the last element of a derivation label.
ROTATION = 0
SUBSET = 1
COINS = 2
INSTANCE = 3


def derive_rng(seed: int, *label: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *label)``.

    Identical arguments give identical streams on every platform.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(v) for v in label))
    return np.random.Generator(np.random.PCG64(ss))

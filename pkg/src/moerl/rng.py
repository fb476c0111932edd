"""Deterministic random streams.

Every random draw in a run comes from a Philox counter-based generator whose
stream identity is a (run seed, stream tag, extras...) spawn key, so any lane,
episode, or subsystem can be replayed in isolation.
"""

from __future__ import annotations

import numpy as np

STREAM_ENV = 1
STREAM_INIT = 2
STREAM_ACTION = 3
STREAM_SHUFFLE = 4


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))

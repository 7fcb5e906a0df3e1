"""Seeded random streams.

Every random quantity derives from one integer seed plus a tuple of integer
keys (grid cell, replicate, purpose). Streams use the counter-based Philox
generator so substreams are independent and cheap to create.
"""

import numpy as np

# purpose tags: the last key of a substream
DATA = 0
DIRECTIONS = 1
VOLUME = 2
HELLINGER = 3
BODY_ERROR = 4
ROTATION = 5


def substream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derived_seed(seed: int, *keys: int) -> int:
    """A 63-bit integer seed for APIs that take a plain integer."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

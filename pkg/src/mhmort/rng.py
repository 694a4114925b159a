"""Named random streams derived from a single master seed.

Every consumer of randomness asks for its own stream, keyed by a name and
optional integer indices, so results do not depend on execution order.
"""

import zlib

import numpy as np


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, name, *keys)``."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    words.extend(int(k) for k in keys)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))

"""Named random streams derived from one master seed.

Every stochastic stage asks for a stream by name (``stream(seed, "attack",
customer_id)``), so the draws a stage sees depend only on the master seed and
the name, never on how many other stages ran first or in which process.
"""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"negative stream key: {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed, *names):
    """Return a Generator for the stream ``names`` under master ``seed``."""
    if seed is None:
        raise ValueError("an explicit seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.default_rng(ss)

"""Named deterministic random streams.

Every stochastic component draws from its own generator derived from the
global seed plus a stable name hash, so adding draws to one component
never shifts the sequence seen by another.
"""

import hashlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    """Generator for `name`, reproducible for a given (seed, name) pair."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))

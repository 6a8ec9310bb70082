"""Named RNG substreams derived from a single 64-bit seed.

All randomness in the package flows through `substream`, so results are a
pure function of (seed, purpose path) and never depend on call order or
worker count.
"""

import hashlib

import numpy as np


def _hash_part(part) -> int:
    digest = hashlib.blake2b(repr(part).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, *purpose) -> np.random.Generator:
    """Return a Generator for the given purpose path.

    `purpose` entries may be strings or integers (e.g. ("optimize", step)).
    The mapping is stable across processes and Python versions.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_hash_part(p) for p in purpose]
    return np.random.default_rng(np.random.SeedSequence(entropy))

"""Named, reproducible random substreams.

All randomness in the package flows from one root seed. Components draw
from named substreams (``link``, ``train``, ``validate``, ``init``, ...)
so that, e.g., validation noise is disjoint from training noise and each
sweep point owns an independent stream.
"""

import hashlib

import numpy as np


def _name_to_int(name) -> int:
    digest = hashlib.sha256(str(name).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root_seed: int, *names) -> np.random.Generator:
    """Generator for the substream identified by ``names`` under ``root_seed``.

    Deterministic across runs and platforms; distinct name tuples give
    statistically independent streams.
    """
    entropy = [int(root_seed)] + [_name_to_int(n) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def substream_key(root_seed: int, *names) -> dict:
    """JSON-serializable record of a substream, for result sidecars."""
    return {"root_seed": int(root_seed), "names": [str(n) for n in names]}

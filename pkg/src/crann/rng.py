"""Deterministic named random streams.

One run seed fans out into independent substreams keyed by string labels,
so components can draw reproducible randomness without coordinating call
order. The label hash is platform-stable (SHA-256), which keeps runs
byte-reproducible across machines.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, *labels: str) -> np.random.Generator:
    """Return a generator for the stream identified by ``seed`` and ``labels``."""
    digest = hashlib.sha256("/".join(labels).encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *words]))


def as_generator(seed_or_rng: "int | np.random.Generator", *labels: str) -> np.random.Generator:
    """Accept either a raw seed or an existing generator.

    A raw seed is expanded through :func:`substream`; a generator is passed
    through unchanged (the caller already owns a stream).
    """
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return substream(seed_or_rng, *labels)

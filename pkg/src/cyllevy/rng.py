"""Deterministic random-stream derivation.

Every stochastic routine takes an explicit ``numpy.random.Generator``.  Streams
are derived from a single master seed plus a key path (module name, task index,
replica index, ...) through ``SeedSequence`` spawn keys feeding the counter-based
Philox generator, so independent tasks get independent streams and any task can
be re-run in isolation bit-for-bit.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["derive", "derive_seedseq"]


def _key_to_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream key parts must be nonnegative, got {part}")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf8"))
    raise TypeError(f"stream key part must be int or str, got {type(part).__name__}")


def derive_seedseq(seed: int, *key) -> np.random.SeedSequence:
    """SeedSequence for master ``seed`` and a key path of ints / short strings."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_to_int(k) for k in key))


def derive(seed: int, *key) -> np.random.Generator:
    """Independent Philox generator for (seed, *key).

    Same arguments always produce an identical stream; distinct key paths give
    statistically independent streams.
    """
    return np.random.Generator(np.random.Philox(derive_seedseq(seed, *key)))

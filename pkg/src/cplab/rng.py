"""Seeded, splittable random streams.

Every experiment draws randomness through a :class:`RandomStream`. A stream is
identified by ``(seed, stream_id)``; building a generator from the same pair
always reproduces the same draws, and child streams are derived by hashing a
label into a fresh ``stream_id``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def stable_hash64(*parts: object) -> int:
    """64-bit hash that does not depend on PYTHONHASHSEED."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RandomStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.seed <= _MASK64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not (0 <= self.stream_id <= _MASK64):
            raise ValueError(f"stream_id must be a 64-bit unsigned integer, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        """Fresh counter-based generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, name: str, index: int = 0) -> "RandomStream":
        """Independent sub-stream labelled by ``(name, index)``."""
        return RandomStream(self.seed, stable_hash64(self.stream_id, name, index))


def as_generator(rng: "RandomStream | np.random.Generator") -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(rng).__name__}")

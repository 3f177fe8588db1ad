"""Counter-based SplitMix64 generator.

The i-th output (i = 1, 2, ...) of a stream keyed by ``key`` is
``mix64(key + i * 0x9E3779B97F4A7C15 mod 2**64)`` where ``mix64`` is the
SplitMix64 finalizer::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

The key of a stream is ``mix64(seed)``; child streams derive their key as
``mix64(parent_key ^ crc32(label))``. Floats use the top 53 bits,
``(u >> 11) * 2**-53``, and bounded integers use ``floor(u01 * n)``.
Because every output depends only on (key, counter), streams can be
reproduced in any language and vectorised without state.
"""

from __future__ import annotations

import zlib
from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed: int, *, _key: int | None = None):
        self.seed = seed & MASK64
        self.key = mix64(self.seed) if _key is None else _key
        self.counter = 0

    def child(self, label: str) -> "SplitMix64":
        key = mix64(self.key ^ zlib.crc32(label.encode("utf-8")))
        return SplitMix64(self.seed, _key=key)

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.key + self.counter * GAMMA)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n > 0")
        return min(int(self.random() * n), n - 1)

    def randint(self, low: int, high: int) -> int:
        """Integer in the closed range [low, high]."""
        return low + self.randbelow(high - low + 1)

    def choice(self, seq: Sequence[T]) -> T:
        return seq[self.randbelow(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, seq: Sequence[T], k: int) -> list[T]:
        pool = list(seq)
        if k > len(pool):
            raise ValueError("sample larger than population")
        self.shuffle(pool)
        return pool[:k]

    def u64_array(self, n: int) -> np.ndarray:
        counters = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.key) + counters * np.uint64(GAMMA)
            return _mix64_array(z)

    def uniform_array(self, n: int, low: float, high: float) -> np.ndarray:
        u = (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return low + (high - low) * u

"""Seedable, splittable random streams.

Every randomized step of a session draws from its own labelled child stream,
so changing one party's input never shifts the draws seen by another party.
"""
from __future__ import annotations

import hashlib
import random
from typing import Sequence, TypeVar

MASK64 = (1 << 64) - 1

T = TypeVar("T")


def _derive(seed: int, path: tuple[str, ...], size: int) -> int:
    h = hashlib.blake2b(seed.to_bytes(8, "little"), digest_size=size, person=b"qpsi-rng")
    for label in path:
        h.update(b"\x1f" + label.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


class SeededRng:
    """A deterministic random stream identified by ``(seed, path)``.

    The stream is seeded from a BLAKE2b digest of the seed and the label path,
    so children are independent of each other and of draw order; draws come
    from :class:`random.Random`, which is cheap per scalar call.
    """

    __slots__ = ("seed", "path", "position", "_rand")

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        if seed < 0 or seed > MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.path = tuple(path)
        self.position = 0
        self._rand = random.Random(_derive(seed, self.path, 16))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, path={'/'.join(self.path) or '.'}, position={self.position})"

    def child(self, *labels: str | int) -> SeededRng:
        return SeededRng(self.seed, self.path + tuple(str(x) for x in labels))

    def child_seed(self, *labels: str | int) -> int:
        """A fresh 64-bit seed derived from this stream's identity and ``labels``."""
        return _derive(self.seed, self.path + ("seed",) + tuple(str(x) for x in labels), 8)

    def random(self) -> float:
        self.position += 1
        return self._rand.random()

    def integer(self, low: int, high: int) -> int:
        """Uniform integer in the closed range ``[low, high]``."""
        self.position += 1
        return self._rand.randint(low, high)

    def bit(self) -> int:
        self.position += 1
        return self._rand.getrandbits(1)

    def choice(self, options: Sequence[T]) -> T:
        self.position += 1
        return options[self._rand.randrange(len(options))]

    def sample(self, population: Sequence[T] | range, k: int) -> list[T]:
        self.position += 1
        return self._rand.sample(population, k)

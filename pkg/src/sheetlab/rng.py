"""Reproducible, splittable random streams built on numpy's SeedSequence."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["RngStream"]


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream_id) pair addressing one independent generator.

    Identical pairs reproduce identical draws; distinct stream ids give
    statistically independent streams (SeedSequence spawn keys).
    """

    seed: int
    stream_id: int = 0
    _path: tuple = field(default=(), repr=False)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id, *self._path)
        )
        return np.random.default_rng(ss)

    def substream(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self._path + (int(k),))

    def split(self, count: int) -> list:
        return [self.substream(k) for k in range(count)]

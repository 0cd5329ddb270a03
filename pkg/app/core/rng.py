"""
Seeded random streams for reproducible arrivals
"""
from __future__ import annotations

import numpy as np


class SeededStreams:
    """Independent numpy generators derived from one master seed.

    Each origin gets its own child stream, so the number of draws made for one
    origin never shifts the values seen by another.
    """

    def __init__(self, seed: int, num_streams: int):
        self._seed = seed
        self._sequence = np.random.SeedSequence(seed)
        self._streams = [
            np.random.Generator(np.random.PCG64(child))
            for child in self._sequence.spawn(num_streams)
        ]

    @property
    def seed(self) -> int:
        return self._seed

    def __len__(self) -> int:
        return len(self._streams)

    def stream(self, index: int) -> np.random.Generator:
        return self._streams[index]

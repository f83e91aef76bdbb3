"""Deterministic event queue and named random substreams."""
from __future__ import annotations

import heapq
import zlib
from typing import Any

import numpy as np


class EventQueue:
    """Min-queue of ``(time, seq, node, payload)``; ``seq`` breaks ties by insertion order."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, int, Any]] = []
        self._seq = 0
        self.now = 0.0

    def push(self, time: float, node: int, payload: Any) -> int:
        if time < self.now:
            raise ValueError(f"event at {time} scheduled in the past (now {self.now})")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (time, seq, node, payload))
        return seq

    def pop(self) -> tuple[float, int, int, Any]:
        item = heapq.heappop(self._heap)
        self.now = item[0]
        return item

    def peek_time(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for one named use of the scenario seed.

    Streams are keyed by name (and optional integers such as a link's end
    points), so e.g. coding draws never shift mobility or loss draws.
    """
    return np.random.default_rng([seed & 0xFFFFFFFF, seed >> 32 & 0xFFFFFFFF, zlib.crc32(name.encode()), *extra])

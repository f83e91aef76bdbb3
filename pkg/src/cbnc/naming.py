"""Content names, bloom filters, and cache summaries."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

DEFAULT_BITS = 1024
DEFAULT_HASHES = 4


@dataclass(frozen=True)
class ContentName:
    file_name: str
    block_id: int | str | None = None

    def __str__(self) -> str:
        if self.block_id is None:
            return self.file_name
        return f"{self.file_name}/{self.block_id}"

    @classmethod
    def parse(cls, text: str) -> ContentName:
        name, sep, bid = text.partition("/")
        return cls(name, bid if sep else None)


def _as_key(name: ContentName | str) -> bytes:
    return str(name).encode()


@dataclass(frozen=True)
class BloomFilter:
    """Fixed-size bloom filter; the bit array is an int (bit i = position i)."""

    m_bits: int = DEFAULT_BITS
    k: int = DEFAULT_HASHES
    salt: int = 0
    bits: int = 0

    def __post_init__(self) -> None:
        if self.m_bits <= 0 or self.m_bits % 8:
            raise ValueError("m_bits must be a positive multiple of 8")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def _positions(self, name: ContentName | str) -> list[int]:
        h = hashlib.blake2b(_as_key(name), digest_size=16,
                            key=self.salt.to_bytes(8, "big", signed=False)).digest()
        h1 = int.from_bytes(h[:8], "big")
        h2 = int.from_bytes(h[8:], "big") | 1
        return [(h1 + i * h2) % self.m_bits for i in range(self.k)]

    def insert(self, name: ContentName | str) -> BloomFilter:
        bits = self.bits
        for p in self._positions(name):
            bits |= 1 << p
        return BloomFilter(self.m_bits, self.k, self.salt, bits)

    def insert_all(self, names: Iterable[ContentName | str]) -> BloomFilter:
        out = self
        for n in names:
            out = out.insert(n)
        return out

    def contains(self, name: ContentName | str) -> bool:
        bits = self.bits
        return all(bits >> p & 1 for p in self._positions(name))

    __contains__ = contains

    def is_empty(self) -> bool:
        return self.bits == 0

    def popcount(self) -> int:
        return self.bits.bit_count()

    def empty_like(self) -> BloomFilter:
        return BloomFilter(self.m_bits, self.k, self.salt)

    @staticmethod
    def expected_fpr(m_bits: int, k: int, inserted: int) -> float:
        return (1.0 - math.exp(-k * inserted / m_bits)) ** k

    def to_bytes(self) -> bytes:
        """k (1 byte), salt (8 bytes), then the bit array, bit 0 first (MSB of byte 0)."""
        size = self.m_bits // 8
        body = 0
        for p in range(self.m_bits):
            if self.bits >> p & 1:
                body |= 1 << (self.m_bits - 1 - p)
        return bytes([self.k]) + self.salt.to_bytes(8, "big") + body.to_bytes(size, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> BloomFilter:
        k = data[0]
        salt = int.from_bytes(data[1:9], "big")
        body = data[9:]
        m_bits = 8 * len(body)
        raw = int.from_bytes(body, "big")
        bits = 0
        for p in range(m_bits):
            if raw >> (m_bits - 1 - p) & 1:
                bits |= 1 << p
        return cls(m_bits, k, salt, bits)

    def wire_size(self) -> int:
        return 9 + self.m_bits // 8


@dataclass(frozen=True)
class CacheSummaryView:
    owner: int
    full_files: BloomFilter
    partial_blocks: BloomFilter
    as_of: float
    ranks: Mapping[str, int] = field(default_factory=dict)

    def has_file(self, file_name: str) -> bool:
        return self.full_files.contains(ContentName(file_name))

    def has_block(self, name: ContentName | str) -> bool:
        return self.partial_blocks.contains(name)

    def rank(self, file_name: str) -> int:
        return self.ranks.get(file_name, 0)

    def wire_size(self) -> int:
        ranks = sum(len(f.encode()) + 3 for f in self.ranks)
        return 2 + 8 + self.full_files.wire_size() + self.partial_blocks.wire_size() + ranks


def summarize_cache(node, clock: float) -> CacheSummaryView:
    """Build the summary a node would broadcast at ``clock``.

    ``node`` needs ``node_id``, ``salt``, ``bloom_bits``, ``bloom_hashes`` and a
    ``files`` mapping of file name to an object exposing ``complete`` (decoded
    and digest verified), ``rank`` and ``block_names()``.
    """
    empty = BloomFilter(node.bloom_bits, node.bloom_hashes, node.salt)
    full = empty
    partial = empty
    ranks: dict[str, int] = {}
    for fname in sorted(node.files):
        store = node.files[fname]
        if store.rank == 0:
            continue
        ranks[fname] = store.rank
        if store.complete:
            full = full.insert(ContentName(fname))
        else:
            partial = partial.insert_all(store.block_names())
    return CacheSummaryView(node.node_id, full, partial, clock, ranks)

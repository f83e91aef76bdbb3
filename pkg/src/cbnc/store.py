"""Per-node, per-file block storage."""
from __future__ import annotations

from collections import Counter
from typing import Hashable, Mapping

import numpy as np

from .integrity import KeyRing, Signature, SignatureChain, verify_origin
from .rlnc import CodedBlock, DecoderState, Generation, PlainBlock, Verdict, decode, digest, reassemble


class FileStore:
    """What one node holds of one file.

    Coded files keep a decoder plus the innovative blocks exactly as they
    arrived (so they can be forwarded verbatim). Uncoded files keep raw blocks
    by index.
    """

    def __init__(self, gen: Generation, coded: bool, manifest: Mapping[int, bytes] | None = None):
        self.gen = gen
        self.coded = coded
        self.manifest = manifest
        self.decoder = DecoderState(gen.ref) if coded else None
        self.plain: dict[int, PlainBlock] = {}
        self.stored: list = []
        self.names: set[str] = set()
        self.sent: Counter = Counter()
        self.origin: Signature | None = None
        self.origin_verified = False
        self.complete = False
        self.failed = False
        self.sources: np.ndarray | None = None
        self.publisher = False
        self.absorbed_from: list[tuple[Hashable, str]] = []
        self.received = 0
        self.innovative = 0

    @classmethod
    def for_publisher(cls, gen: Generation, sources: np.ndarray, coded: bool, origin: Signature | None,
                      manifest: Mapping[int, bytes] | None = None) -> FileStore:
        store = cls(gen, coded, manifest)
        store.publisher = True
        store.complete = True
        store.sources = sources
        store.origin = origin
        store.origin_verified = origin is not None
        if coded:
            for i in range(gen.m):
                e = gen.field.zeros(gen.m)
                e[i] = 1
                store.decoder.absorb(CodedBlock(gen.ref, 0, e, sources[i].copy()))
        else:
            for i in range(gen.m):
                store.plain[i] = PlainBlock(gen.ref, i, sources[i].copy())
        return store

    @property
    def rank(self) -> int:
        return self.decoder.rank if self.coded else len(self.plain)

    @property
    def full(self) -> bool:
        return self.rank == self.gen.m

    @property
    def wanted(self) -> bool:
        return not (self.complete or self.failed)

    def block_names(self) -> list[str]:
        return sorted(self.names)

    def holds(self, name: str) -> bool:
        return name in self.names

    def would_innovate(self, block) -> bool:
        if self.complete or self.failed:
            return False
        if self.coded:
            return self.decoder.would_innovate(block.coefficients)
        return block.index not in self.plain

    def accept(self, block, sender: Hashable = None) -> Verdict:
        self.received += 1
        if self.complete or self.failed:
            return Verdict.REDUNDANT
        if self.coded:
            verdict = self.decoder.absorb(block, sender)
        else:
            verdict = Verdict.REDUNDANT if block.index in self.plain else Verdict.INNOVATIVE
            if verdict is Verdict.INNOVATIVE:
                self.plain[block.index] = block
        if verdict is Verdict.INNOVATIVE:
            self.innovative += 1
            self.stored.append(block)
            self.names.add(block.name)
            self.absorbed_from.append((sender, block.name))
            chain = block.provenance
            if self.origin is None and isinstance(chain, SignatureChain):
                self.origin = chain.origin
        return verdict

    def try_complete(self, keyring: KeyRing) -> bool | None:
        """Decode once full; ``True`` on digest match, ``False`` on mismatch, ``None`` if not yet full."""
        if self.complete:
            return True
        if self.failed or not self.full:
            return None if not self.failed else False
        if self.coded:
            vectors = self.decoder.source_vectors().copy()
        else:
            vectors = np.stack([self.plain[i].payload for i in range(self.gen.m)])
        data = reassemble(self.gen, vectors)
        if digest(data) != self.gen.file_digest:
            self.failed = True
            return False
        self.complete = True
        self.sources = vectors
        self.origin_verified = self.origin is not None and verify_origin(self.origin, self.gen, keyring)
        return True

    def discard(self) -> None:
        """Drop everything held for the file (decoder gives up)."""
        fresh = FileStore(self.gen, self.coded, self.manifest)
        fresh.failed = self.failed
        fresh.received, fresh.innovative = self.received, self.innovative
        fresh.absorbed_from = self.absorbed_from
        self.__dict__.update(fresh.__dict__)

    def decode_bytes(self) -> bytes:
        if self.coded:
            return decode(self.decoder, self.gen)
        return reassemble(self.gen, np.stack([self.plain[i].payload for i in range(self.gen.m)]))

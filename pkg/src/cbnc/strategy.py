"""The four dissemination strategies as per-node policies.

========== ======================= ==================================
strategy   partial cache            full (verified) cache
========== ======================= ==================================
nocoding   forward raw blocks       forward raw blocks
sourceonly forward verbatim         forward verbatim
fullcache  forward verbatim         recode decoded file, sign
unrestr.   recode holdings (>= t)   recode holdings
========== ======================= ==================================

The publisher always originates: raw blocks for nocoding, fresh signed
encodings for every coded strategy.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Hashable

import numpy as np

from .errors import NothingToServe
from .field import GF256, FieldSpec
from .integrity import DEFAULT_KEYRING, Blacklist, KeyRing, sign_block, signer_of, verify_block
from .rlnc import CodedBlock, DecoderState, PlainBlock, digest, encode_random, random_block_id, segment
from .store import FileStore


class StrategyKind(enum.Enum):
    NO_CODING = "nocoding"
    SOURCE_ONLY = "sourceonly"
    FULL_CACHE = "fullcache"
    UNRESTRICTED = "unrestricted"

    @classmethod
    def parse(cls, text: str) -> StrategyKind:
        key = text.strip().lower().replace("_", "").replace("-", "")
        aliases = {"none": "nocoding", "source": "sourceonly", "full": "fullcache", "unrestricted": "unrestricted"}
        key = aliases.get(key, key)
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown strategy {text!r}")


ALL_STRATEGIES = (StrategyKind.UNRESTRICTED, StrategyKind.FULL_CACHE,
                  StrategyKind.SOURCE_ONLY, StrategyKind.NO_CODING)


class ServePolicy(enum.Enum):
    ORIGINATE = "originate"
    FORWARD_VERBATIM = "forward"
    RECODE = "recode"
    RECODE_SIGNED = "recode_signed"


class ReceiveVerdict(enum.Enum):
    ACCEPT_ABSORB = "accept"
    DROP = "drop"


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    accumulation_threshold: int = 2

    def __post_init__(self) -> None:
        if self.kind is StrategyKind.UNRESTRICTED and self.accumulation_threshold < 2:
            raise ValueError("accumulation threshold must be at least 2")

    @property
    def coded(self) -> bool:
        return self.kind is not StrategyKind.NO_CODING

    @property
    def signed(self) -> bool:
        return self.kind in (StrategyKind.SOURCE_ONLY, StrategyKind.FULL_CACHE)

    def policy(self, store: FileStore) -> ServePolicy:
        if store.publisher:
            return ServePolicy.ORIGINATE
        if self.kind is StrategyKind.FULL_CACHE and store.complete and store.origin_verified:
            return ServePolicy.RECODE_SIGNED
        if self.kind is StrategyKind.UNRESTRICTED and (store.complete or store.rank >= self.accumulation_threshold):
            return ServePolicy.RECODE
        return ServePolicy.FORWARD_VERBATIM

    def is_seed(self, store: FileStore) -> bool:
        """Can this holder mint an unlimited supply of fresh, useful blocks?"""
        p = self.policy(store)
        if p is ServePolicy.ORIGINATE:
            return True
        if p is ServePolicy.RECODE:
            return store.full and not store.failed
        return store.complete and p is ServePolicy.RECODE_SIGNED


def produce_at_source(store: FileStore, strategy: Strategy, count: int, rng: np.random.Generator,
                      publisher: int, keyring: KeyRing = DEFAULT_KEYRING) -> list:
    """Blocks the publisher emits: all m raw blocks, or ``count`` signed encodings."""
    gen = store.gen
    if not strategy.coded:
        return [PlainBlock(gen.ref, i, store.sources[i].copy()) for i in range(gen.m)]
    out = []
    for _ in range(count):
        block = encode_random(store.sources, rng, gen)
        out.append(sign_block(block, publisher, store.origin, keyring=keyring))
    return out


def pick_verbatim(store: FileStore, skip: Callable[[str], bool] | None = None):
    """Least-forwarded stored block the target is not known to hold."""
    best = None
    for block in store.stored:
        if skip is not None and skip(block.name):
            continue
        if best is None or store.sent[block.name] < store.sent[best.name]:
            best = block
    return best


def serve_block(store: FileStore, strategy: Strategy, rng: np.random.Generator, node: int,
                keyring: KeyRing = DEFAULT_KEYRING, skip: Callable[[str], bool] | None = None,
                plain_cursor: int | None = None):
    """One block to transmit from ``store`` under ``strategy``.

    ``skip(name)`` filters verbatim candidates the target already has.
    Raises :class:`NothingToServe` when no candidate remains.
    """
    gen = store.gen
    policy = strategy.policy(store)
    if not strategy.coded:
        candidates = sorted(store.plain)
        if plain_cursor is not None and store.publisher:
            idx = plain_cursor % gen.m
            return PlainBlock(gen.ref, idx, store.sources[idx].copy())
        best = None
        for i in candidates:
            name = store.plain[i].name
            if skip is not None and skip(name):
                continue
            if best is None or store.sent[name] < store.sent[store.plain[best].name]:
                best = i
        if best is None:
            raise NothingToServe(f"node {node} has no raw block of {gen.file_id} to offer")
        block = store.plain[best]
        store.sent[block.name] += 1
        return block
    if policy is ServePolicy.ORIGINATE:
        block = encode_random(store.sources, rng, gen)
        return sign_block(block, node, store.origin, keyring=keyring)
    if policy is ServePolicy.RECODE_SIGNED:
        block = encode_random(store.sources, rng, gen)
        return sign_block(block, node, store.origin, holder=store, keyring=keyring)
    if policy is ServePolicy.RECODE:
        return recode_holdings(store, rng)
    block = pick_verbatim(store, skip)
    if block is None:
        raise NothingToServe(f"node {node} has nothing of {gen.file_id} to forward")
    store.sent[block.name] += 1
    return block


def recode_holdings(store: FileStore, rng: np.random.Generator) -> CodedBlock:
    """Random combination of everything held (its row space equals the stored blocks' span)."""
    dec = store.decoder
    spec = store.gen.field
    weights = spec.random(rng, dec.rank)
    rows = dec.rows[: dec.rank]
    mixed = spec.lincomb(weights, rows)
    m = store.gen.m
    return CodedBlock(store.gen.ref, random_block_id(rng), mixed[:m].copy(), mixed[m:].copy())


def on_receive_verify(store: FileStore, block, strategy: Strategy, sender: Hashable = None,
                      blacklist: Blacklist | None = None, keyring: KeyRing = DEFAULT_KEYRING,
                      publisher: int | None = None) -> ReceiveVerdict:
    if blacklist is not None and sender in blacklist:
        return ReceiveVerdict.DROP
    kind = strategy.kind
    if kind is StrategyKind.UNRESTRICTED:
        return ReceiveVerdict.ACCEPT_ABSORB
    if kind is StrategyKind.NO_CODING:
        if not isinstance(block, PlainBlock) or store.manifest is None:
            return ReceiveVerdict.DROP
        ok = store.manifest.get(block.index) == digest(block.payload.tobytes())
        return ReceiveVerdict.ACCEPT_ABSORB if ok else ReceiveVerdict.DROP
    if not verify_block(block, keyring):
        return ReceiveVerdict.DROP
    signer = signer_of(block)
    if blacklist is not None and signer in blacklist:
        return ReceiveVerdict.DROP
    if kind is StrategyKind.SOURCE_ONLY and publisher is not None and signer != publisher:
        return ReceiveVerdict.DROP
    return ReceiveVerdict.ACCEPT_ABSORB


def make_manifest(sources: np.ndarray) -> dict[int, bytes]:
    return {i: digest(np.ascontiguousarray(row).tobytes()) for i, row in enumerate(sources)}


def full_rank_curve(m: int, draws: int, trials: int, rng: np.random.Generator, *, recode: bool,
                    caches: int = 2, spec: FieldSpec = GF256) -> np.ndarray:
    """Monte Carlo P(full rank) after j = 0..draws blocks taken round-robin from ``caches`` full caches.

    ``recode``: every cache emits fresh random combinations of the whole file.
    Otherwise all caches hold one shared set of m stored blocks and each
    forwards them verbatim in its own random order (a new order per pass).
    """
    gen, vs = segment(bytes(m), m, spec)
    hits = np.zeros(draws + 1, dtype=np.int64)
    for _ in range(trials):
        stored = spec.random(rng, (m, m))
        orders = [[] for _ in range(caches)]
        dec = DecoderState(gen.ref)
        for j in range(1, draws + 1):
            if recode:
                coeffs = spec.random(rng, m)
            else:
                queue = orders[(j - 1) % caches]
                if not queue:
                    queue.extend(rng.permutation(m).tolist())
                coeffs = stored[queue.pop()]
            dec.absorb(CodedBlock(gen.ref, 0, coeffs, spec.zeros(gen.n)))
            hits[j] += dec.full
    return hits / trials


def full_rank_probability(m: int, j: int, q: int = 256) -> float:
    """Exact P(j uniform random vectors span GF(q)^m)."""
    if j < m:
        return 0.0
    return float(np.prod([1.0 - float(q) ** (i - j) for i in range(m)]))

"""Simulated signatures, pollution attacks, blacklists and polluter isolation.

Signatures are keyed tags (HMAC-SHA256, truncated) over a digest of the block
contents. Every node's key is derived from a scenario secret, so any party
holding the :class:`KeyRing` can check a tag; nobody forges another node's tag.
"""
from __future__ import annotations

import enum
import hashlib
import hmac
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .errors import NoPolluterFound, NotAuthorized
from .rlnc import CodedBlock, DecoderState, Generation, PlainBlock, Verdict, decode, digest

TAG_BYTES = 16


@dataclass(frozen=True)
class NodeId:
    id: int
    key_tag: bytes = field(default=b"", repr=False, compare=False)

    def __int__(self) -> int:
        return self.id


class KeyRing:
    """Per-node keys derived from a scenario secret."""

    def __init__(self, secret: bytes | int = b"cbnc"):
        if isinstance(secret, int):
            secret = secret.to_bytes(16, "big", signed=True)
        self.secret = secret
        self._cache: dict[int, bytes] = {}

    def key(self, node: int | NodeId) -> bytes:
        nid = int(node)
        k = self._cache.get(nid)
        if k is None:
            k = hashlib.sha256(b"node-key|" + self.secret + nid.to_bytes(8, "big", signed=True)).digest()
            self._cache[nid] = k
        return k

    def node(self, nid: int) -> NodeId:
        return NodeId(nid, self.key(nid))

    def tag(self, node: int | NodeId, over: bytes) -> bytes:
        return hmac.new(self.key(node), over, hashlib.sha256).digest()[:TAG_BYTES]


DEFAULT_KEYRING = KeyRing()


@dataclass(frozen=True)
class Signature:
    signer: int
    over: bytes
    tag: bytes

    def wire_size(self) -> int:
        return 2 + len(self.over) + len(self.tag)


@dataclass(frozen=True)
class SignatureChain:
    origin: Signature
    block: Signature

    def wire_size(self) -> int:
        return self.origin.wire_size() + self.block.wire_size()


class Reason(enum.Enum):
    UNDECODABLE = "undecodable"
    DIGEST_MISMATCH = "digest_mismatch"


class AttackMode(enum.Enum):
    CORRUPT_COEFFICIENTS = "coeff"
    CORRUPT_PAYLOAD = "payload"


@dataclass(frozen=True)
class AttackConfig:
    attacker: int
    mode: AttackMode = AttackMode.CORRUPT_PAYLOAD
    rate: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("attack rate must lie in [0, 1]")


class Blacklist:
    def __init__(self) -> None:
        self.entries: dict[int, Reason] = {}

    def add(self, node: int | NodeId, reason: Reason) -> None:
        self.entries.setdefault(int(node), reason)

    def __contains__(self, node) -> bool:
        return node is not None and int(node) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(sorted(self.entries))


def origin_signature(gen: Generation, publisher: int | NodeId, keyring: KeyRing = DEFAULT_KEYRING) -> Signature:
    over = digest(f"{gen.file_id}|{gen.m}|{gen.n}|{gen.original_length}|".encode() + gen.file_digest)
    return Signature(int(publisher), over, keyring.tag(publisher, over))


def verify_origin(sig: Signature, gen: Generation, keyring: KeyRing = DEFAULT_KEYRING) -> bool:
    expect = digest(f"{gen.file_id}|{gen.m}|{gen.n}|{gen.original_length}|".encode() + gen.file_digest)
    return sig.over == expect and hmac.compare_digest(sig.tag, keyring.tag(sig.signer, sig.over))


def sign_block(block, signer: int | NodeId, origin: Signature, *, holder=None,
               keyring: KeyRing = DEFAULT_KEYRING):
    """Return a copy of ``block`` carrying ``signer``'s block signature.

    The publisher (``origin.signer``) may always sign. Anyone else must pass
    ``holder``, its file store, showing full rank and a verified origin
    signature.
    """
    sid = int(signer)
    if sid != origin.signer:
        if holder is None or not (holder.rank == holder.gen.m and holder.origin_verified):
            raise NotAuthorized(f"node {sid} holds no verified full copy and cannot sign")
    over = digest(block.content_bytes())
    sig = Signature(sid, over, keyring.tag(sid, over))
    return replace(block, provenance=SignatureChain(origin, sig))


def verify_block(block, keyring: KeyRing = DEFAULT_KEYRING) -> bool:
    chain = block.provenance
    if not isinstance(chain, SignatureChain):
        return False
    sig = chain.block
    if sig.over != digest(block.content_bytes()):
        return False
    return hmac.compare_digest(sig.tag, keyring.tag(sig.signer, sig.over))


def signer_of(block) -> int | None:
    chain = block.provenance
    return chain.block.signer if isinstance(chain, SignatureChain) else None


def tamper(block, config: AttackConfig, rng: np.random.Generator):
    """Corrupt ``block`` with probability ``config.rate``; the old signature is kept (and no longer verifies)."""
    if config.rate <= 0.0 or rng.random() >= config.rate:
        return block
    spec = block.gen.field
    if isinstance(block, PlainBlock):
        return replace(block, payload=_perturb(block.payload, spec, rng))
    if config.mode is AttackMode.CORRUPT_COEFFICIENTS:
        coeffs = spec.random(rng, block.gen.m)
        while np.array_equal(coeffs, block.coefficients):
            coeffs = spec.random(rng, block.gen.m)
        return replace(block, coefficients=coeffs)
    return replace(block, payload=_perturb(block.payload, spec, rng))


def _perturb(payload: np.ndarray, spec, rng: np.random.Generator) -> np.ndarray:
    out = payload.copy()
    n = out.shape[0]
    hits = rng.choice(n, size=max(1, n // 8), replace=False)
    delta = rng.integers(1, spec.order, size=hits.size)
    for i, d in zip(hits.tolist(), delta.tolist()):
        out[i] = spec.add(int(out[i]), int(d))
    return out


def is_tampered(block, sources: np.ndarray) -> bool:
    """Oracle: does a coded block disagree with the true source vectors?"""
    spec = block.gen.field
    if isinstance(block, PlainBlock):
        return not np.array_equal(block.payload, sources[block.index])
    return not np.array_equal(spec.lincomb(block.coefficients, sources), block.payload)


SoloStream = Callable[[int], Iterator]


def isolate_polluter(blacklist: Blacklist, gen: Generation, caches: Iterable[int], solo_stream: SoloStream,
                     *, verify: bool = True, keyring: KeyRing = DEFAULT_KEYRING,
                     manifest: Mapping[int, bytes] | None = None, budget: int | None = None) -> int:
    """Download from one cache at a time and accuse the first bad stream.

    ``solo_stream(cache_id)`` yields blocks served by that cache alone.
    Caches are tried in ascending id order, skipping blacklisted ones. A stream
    is bad if a block fails signature verification (when ``verify``), or if it
    reaches full rank but the decoded file does not match ``gen.file_digest``.
    A stream that never reaches full rank within ``budget`` blocks proves
    nothing (the cache may simply be partial).
    """
    budget = budget if budget is not None else 4 * gen.m + 32
    for cache in sorted(int(c) for c in caches):
        if cache in blacklist:
            continue
        reason = _probe(gen, solo_stream(cache), verify, keyring, manifest, budget)
        if reason is not None:
            blacklist.add(cache, reason)
            return cache
    raise NoPolluterFound("every solo stream decoded correctly or was incomplete")


def _probe(gen, stream, verify, keyring, manifest, budget) -> Reason | None:
    if manifest is not None:
        have: dict[int, np.ndarray] = {}
        for _, block in zip(range(budget), stream):
            if verify and not verify_block(block, keyring):
                return Reason.UNDECODABLE
            if digest(block.payload.tobytes()) != manifest.get(block.index):
                return Reason.DIGEST_MISMATCH
            have[block.index] = block.payload
            if len(have) == gen.m:
                return None
        return None
    state = DecoderState(gen.ref)
    for _, block in zip(range(budget), stream):
        if verify and not verify_block(block, keyring):
            return Reason.UNDECODABLE
        state.absorb(block)
        if state.full:
            return None if digest(decode(state, gen)) == gen.file_digest else Reason.DIGEST_MISMATCH
    return None

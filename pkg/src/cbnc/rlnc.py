"""Random linear network coding over a single generation.

A file is cut into ``m`` source vectors of ``n`` symbols. Coded blocks carry
their coefficient vector next to the payload; receivers fold blocks into a
:class:`DecoderState` which keeps the coefficient rows in reduced row-echelon
form, so every arrival is classified innovative/redundant on the spot.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyFile, EmptyInput, GenerationMismatch, RankDeficient
from .field import GF256, FieldSpec

BLOCK_ID_BYTES = 8
DIGEST_BYTES = 32


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class GenerationRef:
    file_id: str
    m: int
    n: int
    field: FieldSpec = GF256


@dataclass(frozen=True)
class Generation:
    file_id: str
    m: int
    n: int
    original_length: int
    file_digest: bytes
    field: FieldSpec = GF256

    @property
    def ref(self) -> GenerationRef:
        return GenerationRef(self.file_id, self.m, self.n, self.field)

    @property
    def file_bits(self) -> int:
        return self.original_length * 8


@dataclass(frozen=True)
class SourceVector:
    index: int
    symbols: np.ndarray


@dataclass(eq=False)
class CodedBlock:
    gen: GenerationRef
    block_id: int
    coefficients: np.ndarray
    payload: np.ndarray
    provenance: Any = None  # integrity.SignatureChain, or None when unsigned

    def content_bytes(self) -> bytes:
        """Canonical bytes covered by a block signature."""
        head = f"{self.gen.file_id}|{self.gen.m}|{self.gen.n}|{self.gen.field}|".encode()
        return (head + self.block_id.to_bytes(BLOCK_ID_BYTES, "big")
                + self.coefficients.tobytes() + self.payload.tobytes())

    @property
    def name(self) -> str:
        return f"{self.gen.file_id}/{self.block_id}"

    def wire_size(self) -> int:
        sig = self.provenance.wire_size() if self.provenance is not None else 0
        w = self.gen.field.wire_bytes
        return header_size(self.gen) + sig + (self.gen.m + self.gen.n) * w

    def same_content(self, other: CodedBlock) -> bool:
        return (self.gen == other.gen and np.array_equal(self.coefficients, other.coefficients)
                and np.array_equal(self.payload, other.payload))


@dataclass(eq=False)
class PlainBlock:
    """Uncoded block used by the no-coding baseline; ``index`` names it."""

    gen: GenerationRef
    index: int
    payload: np.ndarray
    provenance: Any = None

    @property
    def block_id(self) -> int:
        return self.index

    @property
    def name(self) -> str:
        return f"{self.gen.file_id}/{self.index}"

    def content_bytes(self) -> bytes:
        head = f"{self.gen.file_id}|{self.gen.m}|{self.gen.n}|{self.gen.field}|".encode()
        return head + self.index.to_bytes(4, "big") + self.payload.tobytes()

    def wire_size(self) -> int:
        return header_size(self.gen) + 4 + self.gen.n * self.gen.field.wire_bytes


def header_size(gen: GenerationRef) -> int:
    # file name, m, n (2 bytes each), block id
    return len(gen.file_id.encode()) + 1 + 4 + BLOCK_ID_BYTES


class Verdict(enum.Enum):
    INNOVATIVE = "innovative"
    REDUNDANT = "redundant"


def source_matrix(sources: Sequence[SourceVector] | np.ndarray) -> np.ndarray:
    if isinstance(sources, np.ndarray):
        return sources
    return np.stack([s.symbols for s in sorted(sources, key=lambda s: s.index)])


def segment(file_bytes: bytes, m: int, spec: FieldSpec = GF256,
            file_id: str = "file") -> tuple[Generation, list[SourceVector]]:
    """Split ``file_bytes`` into ``m`` equal-length, zero-padded source vectors."""
    if not file_bytes:
        raise EmptyFile("cannot segment an empty file")
    if m < 1:
        raise ValueError("m must be at least 1")
    bits = 8 * len(file_bytes)
    n = max(1, math.ceil(bits / (m * spec.symbol_bits)))
    symbols = spec.bytes_to_symbols(file_bytes, m * n).reshape(m, n)
    gen = Generation(file_id, m, n, len(file_bytes), digest(file_bytes), spec)
    return gen, [SourceVector(i, np.ascontiguousarray(symbols[i])) for i in range(m)]


def reassemble(gen: Generation, vectors: np.ndarray) -> bytes:
    return gen.field.symbols_to_bytes(np.asarray(vectors).reshape(-1), gen.original_length)


def random_block_id(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63, dtype=np.int64))


def encode(sources: Sequence[SourceVector] | np.ndarray, coefficients, gen: Generation | GenerationRef,
           block_id: int = 0) -> CodedBlock:
    ref = gen.ref if isinstance(gen, Generation) else gen
    spec = ref.field
    src = source_matrix(sources)
    coeffs = spec.asarray(coefficients)
    if coeffs.shape != (ref.m,) or src.shape[0] != ref.m:
        raise DimensionMismatch(f"expected {ref.m} coefficients and source vectors, got "
                                f"{coeffs.shape[0] if coeffs.ndim else 0} and {src.shape[0]}")
    payload = spec.lincomb(coeffs, src)
    return CodedBlock(ref, block_id, coeffs, payload)


def encode_random(sources: Sequence[SourceVector] | np.ndarray, rng: np.random.Generator,
                  gen: Generation | GenerationRef) -> CodedBlock:
    ref = gen.ref if isinstance(gen, Generation) else gen
    coeffs = ref.field.random(rng, ref.m)
    return encode(sources, coeffs, ref, random_block_id(rng))


def recode(blocks: Sequence[CodedBlock], rng: np.random.Generator,
           weights: Iterable[int] | None = None) -> CodedBlock:
    """Mix ``blocks`` with random (or given) weights into a new unsigned block."""
    if not blocks:
        raise EmptyInput("recode needs at least one block")
    ref = blocks[0].gen
    for b in blocks[1:]:
        if b.gen != ref:
            raise GenerationMismatch(f"cannot mix {b.gen.file_id} into {ref.file_id}")
    spec = ref.field
    w = spec.random(rng, len(blocks)) if weights is None else spec.asarray(list(weights))
    if w.shape[0] != len(blocks):
        raise DimensionMismatch("one weight per input block is required")
    coeffs = spec.lincomb(w, np.stack([b.coefficients for b in blocks]))
    payload = spec.lincomb(w, np.stack([b.payload for b in blocks]))
    return CodedBlock(ref, random_block_id(rng), coeffs, payload)


@dataclass(eq=False)
class DecoderState:
    """Coefficient/payload rows kept in reduced row-echelon form.

    ``rows[i]`` is the concatenation ``coefficients | payload`` with pivot
    column ``pivots[i]`` normalised to one and cleared from every other row.
    """

    gen: GenerationRef
    rows: np.ndarray = field(init=False, repr=False)
    pivots: np.ndarray = field(init=False, repr=False)
    rank: int = field(init=False, default=0)
    attribution: list = field(init=False, default_factory=list)

    def __post_init__(self) -> None:
        self.rows = self.gen.field.zeros((self.gen.m, self.gen.m + self.gen.n))
        self.pivots = np.zeros(self.gen.m, dtype=np.intp)

    @property
    def m(self) -> int:
        return self.gen.m

    @property
    def full(self) -> bool:
        return self.rank == self.gen.m

    @property
    def coefficients(self) -> np.ndarray:
        return self.rows[: self.rank, : self.gen.m]

    @property
    def payloads(self) -> np.ndarray:
        return self.rows[: self.rank, self.gen.m:]

    def reduced(self, coefficients: np.ndarray, payload: np.ndarray | None = None) -> np.ndarray:
        spec = self.gen.field
        if payload is None:
            payload = spec.zeros(self.gen.n)
        row = np.ascontiguousarray(np.concatenate([coefficients, payload]).astype(spec.dtype))
        spec.reduce_row(row, self.rows, self.pivots, self.rank)
        return row

    def would_innovate(self, coefficients: np.ndarray) -> bool:
        if self.full:
            return False
        spec = self.gen.field
        row = np.ascontiguousarray(coefficients, dtype=spec.dtype).copy()
        spec.reduce_row(row, np.ascontiguousarray(self.rows[:, : self.gen.m]), self.pivots, self.rank)
        return bool(row.any())

    def absorb(self, block: CodedBlock, sender: Hashable = None) -> Verdict:
        if block.gen != self.gen:
            raise GenerationMismatch(f"block of {block.gen} offered to decoder of {self.gen}")
        if self.full:
            return Verdict.REDUNDANT
        spec = self.gen.field
        row = self.reduced(block.coefficients, block.payload)
        nz = np.flatnonzero(row[: self.gen.m])
        if nz.size == 0:
            return Verdict.REDUNDANT
        pivot = int(nz[0])
        spec.scale(row, spec.inv(int(row[pivot])))
        spec.clear_column(self.rows, self.rank, row, pivot)
        self.rows[self.rank] = row
        self.pivots[self.rank] = pivot
        self.rank += 1
        self.attribution.append(sender)
        return Verdict.INNOVATIVE

    def source_vectors(self) -> np.ndarray:
        if not self.full:
            raise RankDeficient(f"rank {self.rank} < {self.gen.m}")
        order = np.argsort(self.pivots)
        return self.rows[order, self.gen.m:]

    def rebuilt_from_scratch(self) -> DecoderState:
        """Independent re-reduction of the stored rows, for invariant checks."""
        fresh = DecoderState(self.gen)
        for i in range(self.rank):
            fresh.absorb(CodedBlock(self.gen, 0, self.rows[i, : self.gen.m].copy(),
                                    self.rows[i, self.gen.m:].copy()))
        return fresh

    def copy(self) -> DecoderState:
        other = DecoderState(self.gen)
        other.rows = self.rows.copy()
        other.pivots = self.pivots.copy()
        other.rank = self.rank
        other.attribution = list(self.attribution)
        return other


def absorb(state: DecoderState, block: CodedBlock, sender: Hashable = None) -> Verdict:
    return state.absorb(block, sender)


def decode(state: DecoderState, gen: Generation) -> bytes:
    if state.gen != gen.ref:
        raise GenerationMismatch("decoder belongs to another generation")
    return reassemble(gen, state.source_vectors())


def is_rref(state: DecoderState) -> bool:
    """True when the stored coefficient rows are in reduced row-echelon form."""
    coeffs = state.coefficients
    for i in range(state.rank):
        p = int(state.pivots[i])
        if coeffs[i, p] != 1 or np.any(coeffs[i, :p]):
            return False
        col = coeffs[:, p]
        if np.count_nonzero(col) != 1:
            return False
    return len(set(state.pivots[: state.rank].tolist())) == state.rank


def batch_decode(blocks: Sequence[CodedBlock], gen: Generation) -> bytes:
    """Decode by Gauss-Jordan inversion of the coefficient matrix.

    Elimination runs with scalar field operations on ``[C | I]``, so each source
    vector comes out as an explicit combination of the received payloads. It
    shares no code path with the incremental decoder and serves as its oracle.
    """
    spec = gen.field
    m, k = gen.m, len(blocks)
    aug = [[int(x) for x in b.coefficients] + [int(i == j) for j in range(k)] for i, b in enumerate(blocks)]
    for col in range(m):
        piv = next((r for r in range(col, k) if aug[r][col]), None)
        if piv is None:
            raise RankDeficient(f"only {col} independent blocks")
        aug[col], aug[piv] = aug[piv], aug[col]
        scale = spec.inv(aug[col][col])
        aug[col] = [spec.mul(scale, x) for x in aug[col]]
        for r in range(k):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [spec.sub(x, spec.mul(f, y)) for x, y in zip(aug[r], aug[col])]
    # rows 0..m-1 now read [I | T]: source i = sum_j T[i][j] * payload_j
    payloads = np.stack([b.payload for b in blocks])
    vectors = np.stack([spec.lincomb(np.array(row[m:], dtype=spec.dtype), payloads) for row in aug[:m]])
    return reassemble(gen, vectors)


def with_new_id(block: CodedBlock, rng: np.random.Generator) -> CodedBlock:
    return replace(block, block_id=random_block_id(rng), provenance=None)

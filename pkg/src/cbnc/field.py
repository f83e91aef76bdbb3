"""Finite-field arithmetic for coding coefficients and payload symbols.

Two field families are supported:

* ``GF(2^8)`` with reduction polynomial x^8+x^4+x^3+x+1 (0x11B). Elements are
  bytes, addition is XOR, multiplication goes through log/antilog tables.
* ``GF(p)`` for a prime p <= 65521, using plain modular arithmetic and
  inversion by exponentiation.

Vectors are numpy arrays (``uint8`` for GF(2^8), ``int64`` for prime fields).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from ._tables import INV, MUL
from .errors import ZeroInverse

MAX_PRIME = 65521


class FieldKind(enum.Enum):
    BINARY_EXTENSION = "binary_extension"
    PRIME = "prime"


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    for d in range(2, math.isqrt(p) + 1):
        if p % d == 0:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    kind: FieldKind
    order: int

    def __post_init__(self) -> None:
        if self.kind is FieldKind.BINARY_EXTENSION:
            if self.order != 256:
                raise ValueError("only GF(2^8) is supported for binary extension fields")
        elif not (_is_prime(self.order) and self.order <= MAX_PRIME):
            raise ValueError(f"prime field order must be a prime <= {MAX_PRIME}, got {self.order}")

    @classmethod
    def gf256(cls) -> FieldSpec:
        return cls(FieldKind.BINARY_EXTENSION, 256)

    @classmethod
    def prime(cls, p: int) -> FieldSpec:
        return cls(FieldKind.PRIME, p)

    @classmethod
    def parse(cls, text: str) -> FieldSpec:
        """Parse a config value: ``gf256`` or ``prime:<p>``."""
        text = text.strip().lower()
        if text == "gf256":
            return cls.gf256()
        if text.startswith("prime:"):
            return cls.prime(int(text.split(":", 1)[1]))
        raise ValueError(f"unknown field {text!r}; expected 'gf256' or 'prime:<p>'")

    def __str__(self) -> str:
        return "gf256" if self.is_binary else f"prime:{self.order}"

    @property
    def is_binary(self) -> bool:
        return self.kind is FieldKind.BINARY_EXTENSION

    @property
    def q(self) -> int:
        return self.order

    @property
    def dtype(self) -> type:
        return np.uint8 if self.is_binary else np.int64

    @cached_property
    def symbol_bits(self) -> int:
        """Payload bits carried per symbol (every b-bit value must be < q)."""
        return 8 if self.is_binary else self.order.bit_length() - 1

    @cached_property
    def wire_bytes(self) -> int:
        """Bytes one symbol occupies on the wire."""
        return 1 if self.is_binary else (self.order - 1).bit_length() + 7 >> 3

    # scalar operations

    def check(self, a: int) -> int:
        a = int(a)
        if not 0 <= a < self.order:
            raise ValueError(f"{a} is not an element of {self}")
        return a

    def add(self, a: int, b: int) -> int:
        if self.is_binary:
            return int(a) ^ int(b)
        return (int(a) + int(b)) % self.order

    def sub(self, a: int, b: int) -> int:
        if self.is_binary:
            return int(a) ^ int(b)
        return (int(a) - int(b)) % self.order

    def neg(self, a: int) -> int:
        return int(a) if self.is_binary else (-int(a)) % self.order

    def mul(self, a: int, b: int) -> int:
        if self.is_binary:
            return int(MUL[a, b])
        return int(a) * int(b) % self.order

    def inv(self, a: int) -> int:
        a = int(a)
        if a == 0:
            raise ZeroInverse("zero has no multiplicative inverse")
        if self.is_binary:
            return int(INV[a])
        return pow(a, self.order - 2, self.order)

    # vector operations

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype)

    def asarray(self, values) -> np.ndarray:
        arr = np.ascontiguousarray(values, dtype=self.dtype)
        if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= self.order):
            raise ValueError(f"vector has entries outside {self}")
        return arr

    def random(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(0, self.order, size=size, dtype=np.int64).astype(self.dtype)

    def axpy(self, dst: np.ndarray, c: int, src: np.ndarray) -> None:
        """``dst += c * src`` in place."""
        if self.is_binary:
            kernels.axpy(dst, int(c), src)
        elif c:
            dst += int(c) * src
            dst %= self.order

    def scale(self, vec: np.ndarray, c: int) -> None:
        if self.is_binary:
            kernels.scale(vec, int(c))
        else:
            vec *= int(c)
            vec %= self.order

    def lincomb(self, coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Return ``sum_i coeffs[i] * rows[i]``."""
        if self.is_binary:
            return kernels.lincomb(np.ascontiguousarray(coeffs, dtype=np.uint8),
                                   np.ascontiguousarray(rows, dtype=np.uint8))
        if len(coeffs) != len(rows):
            raise ValueError("coefficient count does not match row count")
        return (np.asarray(coeffs, dtype=np.int64) @ rows) % self.order

    def matmul(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        if self.is_binary:
            return kernels.matmul(np.ascontiguousarray(left, dtype=np.uint8),
                                  np.ascontiguousarray(right, dtype=np.uint8))
        # keep partial sums below 2^63 for p <= 65521 and modest inner sizes
        out = np.zeros((left.shape[0], right.shape[1]), dtype=np.int64)
        for j in range(left.shape[1]):
            out += np.outer(left[:, j], right[j])
            out %= self.order
        return out

    def reduce_row(self, row: np.ndarray, basis: np.ndarray, pivots: np.ndarray, count: int) -> None:
        if self.is_binary:
            kernels.reduce_row(row, basis, pivots, count)
            return
        p = self.order
        for i in range(count):
            c = int(row[pivots[i]])
            if c:
                row -= c * basis[i]
                row %= p

    def clear_column(self, basis: np.ndarray, count: int, row: np.ndarray, pivot: int) -> None:
        if self.is_binary:
            kernels.clear_column(basis, count, row, pivot)
            return
        col = basis[:count, pivot].copy()
        hit = np.nonzero(col)[0]
        if hit.size:
            basis[hit] = (basis[hit] - np.outer(col[hit], row)) % self.order

    # byte packing

    def bytes_to_symbols(self, data: bytes, count: int) -> np.ndarray:
        """Pack ``data`` into exactly ``count`` symbols, zero-padding the tail."""
        if self.is_binary:
            out = np.zeros(count, dtype=np.uint8)
            raw = np.frombuffer(data, dtype=np.uint8)
            out[: raw.size] = raw
            return out
        b = self.symbol_bits
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        padded = np.zeros(count * b, dtype=np.uint8)
        padded[: bits.size] = bits
        weights = 1 << np.arange(b - 1, -1, -1, dtype=np.int64)
        return padded.reshape(count, b).astype(np.int64) @ weights

    def symbols_to_bytes(self, symbols: np.ndarray, length: int) -> bytes:
        if self.is_binary:
            return np.asarray(symbols, dtype=np.uint8).tobytes()[:length]
        b = self.symbol_bits
        vals = np.asarray(symbols, dtype=np.int64)
        if vals.size and int(vals.max()) >= 1 << b:
            raise ValueError("symbol does not fit the packing width")
        shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
        bits = ((vals[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()
        return np.packbits(bits).tobytes()[:length]


GF256 = FieldSpec.gf256()


# Checked module-level entry points; the FieldSpec methods skip validation
# because the decoder calls them in tight loops.

def add(a: int, b: int, spec: FieldSpec = GF256) -> int:
    return spec.add(spec.check(a), spec.check(b))


def mul(a: int, b: int, spec: FieldSpec = GF256) -> int:
    return spec.mul(spec.check(a), spec.check(b))


def inv(a: int, spec: FieldSpec = GF256) -> int:
    return spec.inv(spec.check(a))

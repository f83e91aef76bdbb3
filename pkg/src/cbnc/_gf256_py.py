"""numpy implementation of the GF(2^8) row kernels (fallback backend)."""
from __future__ import annotations

import numpy as np

from ._tables import MUL

BACKEND = "python"


def axpy(dst: np.ndarray, c: int, src: np.ndarray) -> None:
    if dst.shape[0] != src.shape[0]:
        raise ValueError("length mismatch")
    if c == 0:
        return
    if c == 1:
        np.bitwise_xor(dst, src, out=dst)
    else:
        np.bitwise_xor(dst, MUL[c][src], out=dst)


def scale(dst: np.ndarray, c: int) -> None:
    dst[:] = MUL[c][dst]


def lincomb(coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    if coeffs.shape[0] != rows.shape[0]:
        raise ValueError("coefficient count does not match row count")
    out = np.zeros(rows.shape[1], dtype=np.uint8)
    for c, r in zip(coeffs.tolist(), rows):
        if c:
            np.bitwise_xor(out, MUL[c][r], out=out)
    return out


def matmul(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    if right.shape[0] != left.shape[1]:
        raise ValueError("inner dimensions differ")
    out = np.zeros((left.shape[0], right.shape[1]), dtype=np.uint8)
    for j in range(left.shape[1]):
        # column j of left scales row j of right, for every output row at once
        np.bitwise_xor(out, MUL[left[:, j][:, None], right[j][None, :]], out=out)
    return out


def reduce_row(row: np.ndarray, basis: np.ndarray, pivots: np.ndarray, count: int) -> None:
    for i in range(count):
        c = int(row[pivots[i]])
        if c:
            np.bitwise_xor(row, MUL[c][basis[i]], out=row)


def clear_column(basis: np.ndarray, count: int, row: np.ndarray, pivot: int) -> None:
    col = basis[:count, pivot]
    hit = np.nonzero(col)[0]
    if hit.size:
        basis[hit] ^= MUL[col[hit][:, None], row[None, :]]

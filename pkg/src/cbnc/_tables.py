"""Log/antilog and full product tables for GF(2^8) modulo x^8+x^4+x^3+x+1."""
from __future__ import annotations

import numpy as np

POLY = 0x11B
GENERATOR = 0x03


def _xtime_mul(a: int, b: int) -> int:
    """Carry-less multiply with reduction; used only to build the tables."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        if a & 0x100:
            a ^= POLY
        b >>= 1
    return out


def build_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = _xtime_mul(x, GENERATOR)
    if x != 1:
        raise RuntimeError("generator does not have order 255")
    exp[255:510] = exp[0:255]

    mul = np.zeros((256, 256), dtype=np.uint8)
    nz = np.arange(1, 256)
    la = log[nz]
    mul[1:, 1:] = exp[(la[:, None] + la[None, :]) % 255]

    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - la) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = build_tables()

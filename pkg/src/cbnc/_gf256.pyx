# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled GF(2^8) row kernels.

Mirrors ``cbnc._gf256_py`` exactly; ``cbnc.kernels`` picks whichever imports.
"""
import numpy as np
cimport numpy as cnp

from cbnc._tables import MUL as _MUL

cdef unsigned char TABLE[256][256]

cdef void _load():
    cdef int a, b
    cdef unsigned char[:, :] src = _MUL
    for a in range(256):
        for b in range(256):
            TABLE[a][b] = src[a, b]

_load()

BACKEND = "cython"


cdef inline void _axpy(unsigned char* dst, unsigned char c, const unsigned char* src, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef unsigned char* row
    if c == 0:
        return
    if c == 1:
        for i in range(n):
            dst[i] ^= src[i]
        return
    row = TABLE[c]
    for i in range(n):
        dst[i] ^= row[src[i]]


def axpy(unsigned char[::1] dst, int c, const unsigned char[::1] src):
    """dst += c * src, in place."""
    if dst.shape[0] != src.shape[0]:
        raise ValueError("length mismatch")
    with nogil:
        _axpy(&dst[0], <unsigned char>c, &src[0], dst.shape[0])


def scale(unsigned char[::1] dst, int c):
    cdef Py_ssize_t i
    cdef unsigned char* row = TABLE[<unsigned char>c]
    with nogil:
        for i in range(dst.shape[0]):
            dst[i] = row[dst[i]]


def lincomb(const unsigned char[::1] coeffs, const unsigned char[:, ::1] rows):
    cdef Py_ssize_t k = rows.shape[0], n = rows.shape[1], i
    if coeffs.shape[0] != k:
        raise ValueError("coefficient count does not match row count")
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] acc = out
    if n == 0:
        return out
    with nogil:
        for i in range(k):
            _axpy(&acc[0], coeffs[i], &rows[i, 0], n)
    return out


def matmul(const unsigned char[:, ::1] left, const unsigned char[:, ::1] right):
    cdef Py_ssize_t r = left.shape[0], k = left.shape[1], n = right.shape[1], i, j
    if right.shape[0] != k:
        raise ValueError("inner dimensions differ")
    out = np.zeros((r, n), dtype=np.uint8)
    cdef unsigned char[:, ::1] acc = out
    if n == 0:
        return out
    with nogil:
        for i in range(r):
            for j in range(k):
                _axpy(&acc[i, 0], left[i, j], &right[j, 0], n)
    return out


def reduce_row(unsigned char[::1] row, const unsigned char[:, ::1] basis,
               const Py_ssize_t[::1] pivots, Py_ssize_t count):
    """Clear every pivot column of ``row`` using the first ``count`` basis rows.

    Basis rows must be normalised (pivot entry 1).
    """
    cdef Py_ssize_t i, n = row.shape[0]
    cdef unsigned char c
    with nogil:
        for i in range(count):
            c = row[pivots[i]]
            if c:
                _axpy(&row[0], c, &basis[i, 0], n)


def clear_column(unsigned char[:, ::1] basis, Py_ssize_t count,
                 const unsigned char[::1] row, Py_ssize_t pivot):
    """Eliminate ``pivot`` from the first ``count`` basis rows using ``row``."""
    cdef Py_ssize_t i, n = row.shape[0]
    cdef unsigned char c
    with nogil:
        for i in range(count):
            c = basis[i, pivot]
            if c:
                _axpy(&basis[i, 0], c, &row[0], n)

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbnc.errors import DimensionMismatch, EmptyFile, EmptyInput, GenerationMismatch, RankDeficient
from cbnc.field import GF256, FieldSpec
from cbnc.rlnc import (
    CodedBlock, DecoderState, Verdict, batch_decode, decode, digest, encode, encode_random, header_size,
    is_rref, reassemble, recode, segment, source_matrix,
)

from conftest import slow_mul


def unit(m: int, i: int, spec=GF256) -> np.ndarray:
    e = spec.zeros(m)
    e[i] = 1
    return e


def test_segment_examples():
    gen, vs = segment(b"\x01\x02\x03\x04", 2)
    assert gen.n == 2 and [v.symbols.tolist() for v in vs] == [[1, 2], [3, 4]]
    gen, vs = segment(b"abcde", 2)
    assert gen.n == 3 and vs[1].symbols.tolist()[-1] == 0
    gen, vs = segment(b"hello", 1)
    assert gen.n == 5 and bytes(vs[0].symbols.tolist()) == b"hello"
    assert gen.original_length == 5 and gen.file_digest == digest(b"hello")


def test_segment_errors():
    with pytest.raises(EmptyFile):
        segment(b"", 2)
    with pytest.raises(ValueError):
        segment(b"x", 0)


@pytest.mark.parametrize("p", [2, 257, 65521])
def test_segment_prime_roundtrip(p):
    spec = FieldSpec.prime(p)
    data = bytes(range(200))
    gen, vs = segment(data, 7, spec)
    assert gen.m * gen.n * spec.symbol_bits >= 8 * len(data)
    assert reassemble(gen, source_matrix(vs)) == data


def test_encode_examples(rng):
    gen, vs = segment(rng.bytes(32), 4)
    src = source_matrix(vs)
    for i in range(4):
        assert np.array_equal(encode(vs, unit(4, i), gen).payload, src[i])
    assert not encode(vs, np.zeros(4, np.uint8), gen).payload.any()
    with pytest.raises(DimensionMismatch):
        encode(vs, [1, 2, 3], gen)


def test_encode_matches_per_symbol_oracle(rng):
    gen, vs = segment(rng.bytes(32), 4)
    assert gen.n == 8
    for _ in range(50):
        coeffs = rng.integers(0, 256, 4)
        block = encode(vs, coeffs, gen)
        for j in range(8):
            acc = 0
            for i in range(4):
                acc ^= slow_mul(int(coeffs[i]), int(vs[i].symbols[j]))
            assert block.payload[j] == acc


def test_encode_random_deterministic():
    gen, vs = segment(b"determinism" * 10, 4)
    a = encode_random(vs, np.random.default_rng(7), gen)
    b = encode_random(vs, np.random.default_rng(7), gen)
    assert a.content_bytes() == b.content_bytes() and a.block_id == b.block_id


def test_encode_random_uniform_coefficients():
    gen, vs = segment(b"x" * 8, 1)
    rng = np.random.default_rng(3)
    counts = np.bincount([int(encode_random(vs, rng, gen).coefficients[0]) for _ in range(10_000)], minlength=256)
    expected = 10_000 / 256
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 99% point of chi-square with 255 dof (Wilson-Hilferty)
    k, z = 255, 2.3263
    bound = k * (1 - 2 / (9 * k) + z * math.sqrt(2 / (9 * k))) ** 3
    assert chi2 < bound


def test_recode_examples(rng):
    gen, vs = segment(rng.bytes(64), 4)
    b = encode_random(vs, rng, gen)
    same = recode([b], rng, weights=[1])
    assert same.same_content(b) and same.block_id != b.block_id
    c = encode_random(vs, rng, gen)
    dec = DecoderState(gen.ref)
    dec.absorb(b)
    dec.absorb(c)
    assert dec.absorb(recode([b, c], rng)) is Verdict.REDUNDANT


def test_recode_errors(rng):
    g1, v1 = segment(b"a" * 16, 2, file_id="a")
    g2, v2 = segment(b"b" * 16, 2, file_id="b")
    with pytest.raises(EmptyInput):
        recode([], rng)
    with pytest.raises(GenerationMismatch):
        recode([encode_random(v1, rng, g1), encode_random(v2, rng, g2)], rng)
    with pytest.raises(GenerationMismatch):
        DecoderState(g1.ref).absorb(encode_random(v2, rng, g2))


def test_recode_chain_depth_five_decodes(rng):
    data = rng.bytes(5000)
    gen, vs = segment(data, 8)
    pool = [encode_random(vs, rng, gen) for _ in range(10)]
    for _ in range(5):
        pool = [recode(pool, rng) for _ in range(10)]
    dec = DecoderState(gen.ref)
    for b in pool:
        dec.absorb(b)
    assert dec.full and decode(dec, gen) == data


def test_absorb_unit_vectors_and_duplicates(rng):
    data = rng.bytes(100)
    gen, vs = segment(data, 5)
    dec = DecoderState(gen.ref)
    blocks = [encode(vs, unit(5, i), gen) for i in range(5)]
    assert dec.absorb(blocks[0], sender=9) is Verdict.INNOVATIVE
    assert dec.absorb(blocks[0]) is Verdict.REDUNDANT
    for b in blocks[1:]:
        assert dec.absorb(b) is Verdict.INNOVATIVE
    assert dec.rank == 5 and dec.attribution[0] == 9
    assert decode(dec, gen) == data


def test_decode_rank_deficient(rng):
    gen, vs = segment(rng.bytes(64), 4)
    dec = DecoderState(gen.ref)
    for i in range(3):
        dec.absorb(encode(vs, unit(4, i), gen))
    with pytest.raises(RankDeficient):
        decode(dec, gen)


def test_full_rank_at_m_blocks_probability():
    # P(m random blocks reach full rank) = prod (1 - 256^-i) ~ 0.996 for m = 16
    gen, vs = segment(bytes(range(256)) * 4, 16)
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(1000):
        dec = DecoderState(gen.ref)
        for _ in range(16):
            dec.absorb(encode_random(vs, rng, gen))
        hits += dec.full
    assert hits >= 990


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_rref_and_monotonic_rank(m, size, seed):
    rng = np.random.default_rng(seed)
    data = rng.bytes(size)
    gen, vs = segment(data, m)
    dec = DecoderState(gen.ref)
    last = 0
    while not dec.full:
        dec.absorb(encode_random(vs, rng, gen))
        assert last <= dec.rank <= m and is_rref(dec)
        again = dec.rebuilt_from_scratch()
        assert np.array_equal(again.coefficients[np.argsort(again.pivots[:again.rank])],
                              dec.coefficients[np.argsort(dec.pivots[:dec.rank])])
        last = dec.rank
    assert decode(dec, gen) == data == batch_decode([CodedBlock(gen.ref, 0, r[:m].copy(), r[m:].copy())
                                                     for r in dec.rows], gen)


def test_batch_oracle_on_prime_field(rng):
    spec = FieldSpec.prime(13)
    data = rng.bytes(40)
    gen, vs = segment(data, 4, spec)
    blocks = [encode_random(vs, rng, gen) for _ in range(8)]
    dec = DecoderState(gen.ref)
    for b in blocks:
        dec.absorb(b)
    assert decode(dec, gen) == batch_decode(blocks, gen) == data


def test_wire_size_counts_coefficients(rng):
    gen, vs = segment(rng.bytes(1024), 16)
    b = encode_random(vs, rng, gen)
    assert b.wire_size() == header_size(gen.ref) + 16 + gen.n

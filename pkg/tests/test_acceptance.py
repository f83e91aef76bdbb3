"""The eleven acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (printed inline and again in the
terminal summary) before asserting.
"""
from __future__ import annotations

import itertools
import math
import time

import numpy as np
import pytest

from cbnc.field import GF256, FieldSpec
from cbnc.harness import compare, preset_corridor30, preset_mobile10, run_experiment
from cbnc.integrity import (
    AttackConfig, AttackMode, Blacklist, KeyRing, isolate_polluter, origin_signature, sign_block, tamper,
)
from cbnc.protocol import MessageKind, NodeState, RejectCode, Rtsb, Summary, on_data, on_request, on_rtsb, \
    on_rtsb_reply, on_ack, on_timer, summarize, update_overheard
from cbnc.rlnc import DecoderState, Verdict, batch_decode, decode, digest, encode_random, recode, segment, \
    source_matrix
from cbnc.sim import ScenarioConfig, TopologyKind, run
from cbnc.store import FileStore
from cbnc.strategy import Strategy, StrategyKind, full_rank_curve, make_manifest, serve_block

from conftest import slow_mul

K = StrategyKind
FC, UN, SO, NC = K.FULL_CACHE.value, K.UNRESTRICTED.value, K.SOURCE_ONLY.value, K.NO_CODING.value
BAND = 0.15


# 1. field correctness


def _axiom_failures(spec: FieldSpec, triples) -> int:
    bad = 0
    add, mul = spec.add, spec.mul
    for a, b, c in triples:
        bad += add(a, b) != add(b, a) or mul(a, b) != mul(b, a)
        bad += add(add(a, b), c) != add(a, add(b, c)) or mul(mul(a, b), c) != mul(a, mul(b, c))
        bad += mul(a, add(b, c)) != add(mul(a, b), mul(a, c))
        bad += add(a, 0) != a or mul(a, 1) != a or add(a, spec.neg(a)) != 0
        if a:
            bad += mul(a, spec.inv(a)) != 1
    return bad


def test_c1_field_correctness(verdict):
    t0 = time.perf_counter()
    bad = 0
    for p in (7, 13):
        spec = FieldSpec.prime(p)
        bad += _axiom_failures(spec, itertools.product(range(p), repeat=3))
    rng = np.random.default_rng(1)
    triples = rng.integers(0, 256, size=(10_000, 3)).tolist()
    bad += _axiom_failures(GF256, triples)
    # products against an independent shift-and-add multiply
    bad += sum(GF256.mul(a, b) != slow_mul(a, b) for a, b, _ in triples)
    inv_bad = sum(slow_mul(a, GF256.inv(a)) != 1 for a in range(1, 256))
    dt = time.perf_counter() - t0
    ok = bad == 0 and inv_bad == 0 and dt < 5.0
    assert verdict(1, "field correctness", ok,
                   f"axiom violations {bad}, bad inverses {inv_bad}/255, {dt:.2f} s (limit 5 s)")


# 2. codec roundtrip oracle


def test_c2_codec_roundtrip_oracle(verdict):
    t0 = time.perf_counter()
    trials, full, mismatched, oracle_diff = 1000, 0, 0, 0
    for trial in range(trials):
        rng = np.random.default_rng([2, trial])
        size = int(rng.integers(1, 64 * 1024 + 1))
        m = int(rng.integers(1, 33))
        depth = int(rng.integers(0, 6))
        data = rng.bytes(size)
        gen, vs = segment(data, m)
        pool = [encode_random(vs, rng, gen) for _ in range(m + 2)]
        for _ in range(depth):
            pool = [recode(pool, rng) for _ in range(m + 2)]
        dec = DecoderState(gen.ref)
        used = []
        for b in pool:
            used.append(b)
            dec.absorb(b)
            if dec.full:
                break
        if not dec.full:
            continue
        full += 1
        out = decode(dec, gen)
        mismatched += digest(out) != digest(data)
        oracle_diff += batch_decode(used, gen) != out
    dt = time.perf_counter() - t0
    ok = full > 0.95 * trials and mismatched == 0 and oracle_diff == 0 and dt < 60.0
    assert verdict(2, "codec roundtrip oracle", ok,
                   f"{full}/{trials} trials at full rank, digest mismatches {mismatched}, "
                   f"RREF vs batch-inversion disagreements {oracle_diff}, {dt:.1f} s (limit 60 s)")


# 3. innovativeness law


def test_c3_innovativeness_law(verdict):
    m, q = 8, 256
    gen, vs = segment(bytes(range(256)) * 2, m)
    rng = np.random.default_rng(3)
    tried = np.zeros(m, dtype=int)
    innov = np.zeros(m, dtype=int)
    total = 0
    while total < 10_000:
        dec = DecoderState(gen.ref)
        while not dec.full and total < 10_000:
            r = dec.rank
            tried[r] += 1
            innov[r] += dec.absorb(encode_random(vs, rng, gen)) is Verdict.INNOVATIVE
            total += 1
    worst = 0.0
    lines = []
    for r in range(m):
        if not tried[r]:
            continue
        p = 1.0 - float(q) ** (r - m)
        se = math.sqrt(max(p * (1 - p), 1e-12) / tried[r])
        z = abs(innov[r] / tried[r] - p) / se
        worst = max(worst, z)
        lines.append(f"r={r}:{innov[r]}/{tried[r]}")
    ok = worst <= 3.0
    assert verdict(3, "innovativeness law", ok,
                   f"{total} absorptions, worst deviation {worst:.2f} SE (limit 3); " + " ".join(lines))


# 4. hypothesis-1 micro-test


def test_c4_independent_recoding_beats_identical_verbatim(verdict):
    parts, ok = [], True
    for m in (4, 8, 16):
        rec = full_rank_curve(m, 2 * m, 10_000, np.random.default_rng([4, m, 0]), recode=True)
        verb = full_rank_curve(m, 2 * m, 10_000, np.random.default_rng([4, m, 1]), recode=False)
        weak = bool(np.all(rec >= verb))
        strict = bool(np.all(rec[m:2 * m] > verb[m:2 * m]))
        ok &= weak and strict
        parts.append(f"m={m}: at j=m {rec[m]:.4f} vs {verb[m]:.4f}, at j=2m-1 {rec[2 * m - 1]:.4f} vs "
                     f"{verb[2 * m - 1]:.4f}, >= everywhere {weak}, > on [m,2m) {strict}")
    assert verdict(4, "H1 micro-test", ok, "; ".join(parts))


# 5. one-third recovery


def _full_cache(gen, src, rng, origin, node, keyring) -> FileStore:
    store = FileStore(gen, True)
    while not store.full:
        store.accept(sign_block(encode_random(src, rng, gen), 0, origin, keyring=keyring), 0)
    assert store.try_complete(keyring)
    return store


def test_c5_one_third_recovery(verdict):
    m, trials = 16, 1000
    per_cache = math.ceil(m / 3)
    keyring = KeyRing(5)
    strategy = Strategy(K.FULL_CACHE)
    rng = np.random.default_rng(5)
    hits = 0
    for _ in range(trials):
        gen, vs = segment(rng.bytes(m * 32), m)
        src = source_matrix(vs)
        origin = origin_signature(gen, 0, keyring)
        caches = [_full_cache(gen, src, rng, origin, c, keyring) for c in (1, 2, 3)]
        # the first broadcast never arrived: the receiver starts from nothing
        dec = DecoderState(gen.ref)
        for c, store in zip((1, 2, 3), caches):
            for _ in range(per_cache):
                dec.absorb(serve_block(store, strategy, rng, c, keyring))
        hits += dec.full
    bound = float(np.prod([1 - 256.0 ** -i for i in range(1, m + 1)])) - 0.01
    rate = hits / trials
    ok = rate >= 0.98 and rate >= bound
    assert verdict(5, "one-third recovery", ok,
                   f"{hits}/{trials} full rank from 3 x {per_cache} fresh recodes ({rate:.3f}; "
                   f"need >= 0.98 and >= {bound:.4f})")


# 6. corridor-30 ordering


def test_c6_corridor30_ordering(verdict):
    t0 = time.perf_counter()
    table = run_experiment(preset_corridor30(range(1, 21)), echo=None)
    dt = time.perf_counter() - t0
    ok = dt < 300.0
    parts = []
    for topo in table.topologies():
        seeds = table.stats(topo, FC).seeds
        h2 = compare(table, topo, FC, UN)
        h1 = compare(table, topo, FC, SO)
        base = compare(table, topo, SO, NC)
        good = seeds >= 20 and h2.within(BAND) and h1.greater() and base.greater()
        ok &= good
        parts.append(f"{topo}: U {h2.mean_b:.0f} ~ FC {h2.mean_a:.0f} (gap {100 * h2.relative:.1f}%), "
                     f"FC-SO {h1.diff:.0f} vs SE {h1.se:.0f}, SO-NC {base.diff:.0f} vs SE {base.se:.0f} bps")
    assert verdict(6, "corridor-30 ordering", ok, "; ".join(parts) + f"; 20 seeds, {dt:.0f} s (limit 300 s)")


# 7. mobility parity


def test_c7_mobility_parity(verdict):
    t0 = time.perf_counter()
    spec = preset_mobile10(range(1, 21))
    spec.strategies = (K.UNRESTRICTED, K.FULL_CACHE, K.NO_CODING)
    table = run_experiment(spec, echo=None)
    dt = time.perf_counter() - t0
    topo = TopologyKind.RANDOM_WAYPOINT.value
    parity = compare(table, topo, FC, UN, "decode_time")
    fc_nc = compare(table, topo, NC, FC, "decode_time")
    un_nc = compare(table, topo, NC, UN, "decode_time")
    ok = (parity.within(BAND) and fc_nc.greater() and un_nc.greater() and dt < 600.0
          and table.stats(topo, FC).seeds >= 20)
    fails = {s: table.stats(topo, s).failure_rate for s in (FC, UN, NC)}
    assert verdict(7, "mobility parity", ok,
                   f"decode time FC {parity.mean_a:.1f} s vs U {parity.mean_b:.1f} s "
                   f"(gap {100 * parity.relative:.1f}%), NC {fc_nc.mean_a:.1f} s "
                   f"(NC-FC {fc_nc.diff:.1f} vs SE {fc_nc.se:.1f}); failure rates "
                   + ", ".join(f"{k} {v:.2f}" for k, v in fails.items()) + f"; 20 seeds, {dt:.0f} s (limit 600 s)")


# 8. pollution vulnerability and protection


def test_c8_pollution(verdict):
    runs = 50
    ok, parts = True, []
    for mode in AttackMode:
        def cfg(strategy, seed):
            return ScenarioConfig(topology=TopologyKind.CORRIDOR_INTERFERING, loss=0.3, seed=seed,
                                  strategy=strategy, attacker_node=1, attack_mode=mode, attack_rate=1.0)

        polluted = sum(run(cfg(K.UNRESTRICTED, s)).metrics[0].polluted for s in range(1, runs + 1))
        tampered = {}
        for strategy in (K.FULL_CACHE, K.SOURCE_ONLY):
            count = 0
            for s in range(1, runs + 1):
                r = run(cfg(strategy, s))
                count += sum(" absorb " in line and "tampered=1" in line for line in r.trace)
                count += r.tampered_absorbed
            tampered[strategy.value] = count
        good = polluted >= 0.9 * runs and not any(tampered.values())
        ok &= good
        parts.append(f"{mode.value}: unrestricted polluted {polluted}/{runs}, tampered absorbed "
                     + ", ".join(f"{k} {v}" for k, v in tampered.items()))
    assert verdict(8, "pollution vulnerability and protection", ok,
                   "; ".join(parts) + " (interfering corridor, attacker node 1, rate 1.0)")


# 9. isolation soundness


def test_c9_isolation_soundness(verdict):
    keyring = KeyRing(9)
    strategy = Strategy(K.FULL_CACHE)
    rng = np.random.default_rng(9)
    data = rng.bytes(16 * 64)
    gen, vs = segment(data, 16, file_id="F")
    src = source_matrix(vs)
    origin = origin_signature(gen, 0, keyring)
    cases, wrong, failed_downloads = 0, 0, 0
    for n in range(2, 6):
        ids = list(range(1, n + 1))
        for attacker in ids:
            for verify in (True, False):
                caches = {c: _full_cache(gen, src, rng, origin, c, keyring) for c in ids}
                attack = AttackConfig(attacker, AttackMode.CORRUPT_PAYLOAD, 1.0)

                def solo(c, caches=caches, attack=attack):
                    r = np.random.default_rng([9, n, c])
                    while True:
                        b = serve_block(caches[c], strategy, r, c, keyring)
                        yield tamper(b, attack, r) if c == attack.attacker else b

                bl = Blacklist()
                cases += 1
                accused = isolate_polluter(bl, gen, ids, solo, verify=verify, keyring=keyring)
                wrong += accused != attacker or list(bl) != [attacker]
                dec = DecoderState(gen.ref)
                streams = [solo(c) for c in ids if c not in bl]
                for b in itertools.chain.from_iterable(zip(*streams)):
                    dec.absorb(b)
                    if dec.full:
                        break
                failed_downloads += not dec.full or decode(dec, gen) != data
    ok = wrong == 0 and failed_downloads == 0
    assert verdict(9, "isolation soundness", ok,
                   f"{cases} cases (N=2..5, every attacker position, with and without signature checks): "
                   f"wrong accusations {wrong}, failed follow-up downloads {failed_downloads}")


# 10. protocol conformance


def _handshake_node(nid, gen, src, publisher=False, wants=False) -> NodeState:
    keyring = KeyRing(10)
    node = NodeState(nid, Strategy(K.FULL_CACHE), {"F": gen}, {"F": 0}, keyring=keyring,
                     rng=np.random.default_rng(nid), manifests={"F": make_manifest(src)}, handshake=True)
    if publisher:
        node.files["F"] = FileStore.for_publisher(gen, src, True, origin_signature(gen, nid, keyring))
    if wants:
        node.own_interests.add("F")
    return node


def test_c10_protocol_conformance(verdict):
    gen, vs = segment(np.random.default_rng(10).bytes(256), 4, file_id="F")
    src = source_matrix(vs)
    a = _handshake_node(0, gen, src, publisher=True)
    b = _handshake_node(1, gen, src, wants=True)
    update_overheard(b, Summary(0, summarize(a, 0.0)), 0.0)
    exchange = []
    [req] = on_timer(b, MessageKind.REQUEST, 0.0)
    [rtsb] = on_request(a, req, 1, 0.0)
    reply = on_rtsb(b, rtsb, 0.0)
    [data] = on_rtsb_reply(a, reply, 0.0)
    [ack] = on_data(b, data, 0, 0.0)
    on_ack(a, ack, 0.0)
    exchange = [rtsb.kind.value, "accept" if reply.accept else "reject", data.kind.value, ack.kind.value]
    delivered = b.files["F"].rank == 1 and exchange == ["rtsb", "accept", "data", "ack"]
    dup = on_rtsb(b, Rtsb(0, data.name, "F", 1), 0.1)
    c_first = on_rtsb(b, Rtsb(0, "F/424242", "F", 1), 0.2)
    c_second = on_rtsb(b, Rtsb(2, "F/424242", "F", 1), 0.2)
    ok = (delivered and dup.code is RejectCode.BLOCK_ALREADY_RECEIVED and c_first.accept
          and c_second.code is RejectCode.BEING_SENT_BY_OTHER)
    assert verdict(10, "protocol conformance", ok,
                   f"exchange {'/'.join(exchange)} delivered rank {b.files['F'].rank}; duplicate offer -> "
                   f"{dup.code and int(dup.code)}; offer in progress elsewhere -> "
                   f"{c_second.code and int(c_second.code)}")


# 11. determinism


def test_c11_determinism(verdict):
    checked, diffs = 0, 0
    for preset, seeds in ((preset_corridor30, (1, 2)), (preset_mobile10, (1,))):
        spec = preset(seeds)
        for _, cfg in spec.configs():
            a, b = run(cfg), run(cfg)
            checked += 1
            diffs += a.trace_text() != b.trace_text() or a.csv_text() != b.csv_text()
        first = run_experiment(preset(seeds), echo=None).to_csv()
        second = run_experiment(preset(seeds), echo=None).to_csv()
        diffs += first != second
    ok = diffs == 0
    assert verdict(11, "determinism", ok, f"{checked} preset runs repeated, {diffs} byte differences in trace or CSV")

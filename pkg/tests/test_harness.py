from __future__ import annotations

import math

import numpy as np
import pytest

from cbnc.errors import InsufficientSeeds, RunError
from cbnc.harness import (
    DEFAULT_BAND, MIN_SEEDS, Aggregate, Comparison, ExperimentSpec, ResultTable, compare, preset_corridor30,
    preset_mobile10, run_experiment, test_hypotheses as evaluate,
)
from cbnc.sim import CSV_HEADER, ScenarioConfig, TopologyKind, run
from cbnc.strategy import ALL_STRATEGIES, StrategyKind

K = StrategyKind


def test_corridor_preset_contents():
    spec = preset_corridor30()
    assert spec.loss == 0.30 and spec.base.m == 16 and spec.base.block_size == 1024
    assert set(spec.strategies) == set(ALL_STRATEGIES) and len(spec.strategies) == 4
    assert spec.topologies == (TopologyKind.CORRIDOR_DISJOINT, TopologyKind.CORRIDOR_INTERFERING)
    assert len(spec.seeds) >= MIN_SEEDS
    r = run(spec.base.replace(horizon=0.0))
    assert len(r.metrics) == 1  # one end receiver
    topo_cfgs = {cfg.topology for _, cfg in spec.configs()}
    assert topo_cfgs == set(spec.topologies)


def test_mobile_preset_contents():
    spec = preset_mobile10()
    b = spec.base
    assert b.topology is TopologyKind.RANDOM_WAYPOINT and b.nodes == 10 and b.publishers == 3 and b.receivers == 7
    r = run(b.replace(horizon=1.0))
    assert sorted(r.sources) == ["F0", "F1", "F2"]
    for i in r.metrics:
        assert r.nodes[i.receiver].own_interests == {"F0", "F1", "F2"}
    assert spec.file_bits(TopologyKind.RANDOM_WAYPOINT) == 3 * 16 * 1024 * 8


def _small(seeds=range(1, 11), strategies=ALL_STRATEGIES, **kw):
    base = ScenarioConfig(topology=TopologyKind.CORRIDOR_DISJOINT, loss=0.3, horizon=60.0)
    return ExperimentSpec("small", base, strategies, tuple(seeds), **kw)


def test_cardinality_and_reproducibility(tmp_path):
    spec = _small(out=tmp_path)
    table = run_experiment(spec, echo=None)
    assert len(table) == 40
    text = (tmp_path / "small.csv").read_text()
    assert text.splitlines()[0] == CSV_HEADER and len(text.splitlines()) == 41
    again = run_experiment(_small(), echo=None)
    assert again.to_csv() == table.to_csv() == text


def test_threaded_runs_merge_deterministically():
    a = run_experiment(_small(seeds=range(1, 5)), echo=None)
    b = run_experiment(_small(seeds=range(1, 5), workers=3), echo=None)
    assert a.to_csv() == b.to_csv()


def test_empty_sweep_warns():
    with pytest.warns(UserWarning):
        table = run_experiment(_small(seeds=()), echo=None)
    assert len(table) == 0


def test_aggregates_recomputable_from_csv():
    table = run_experiment(_small(), echo=None)
    reread = ResultTable.from_csv(table.to_csv(), 16 * 1024 * 8, 60.0)
    for strategy in ("fullcache", "nocoding"):
        rows = [r for r in reread.rows if r.strategy == strategy]
        thr = [0.0 if r.decode_time_s is None else 16 * 1024 * 8 / r.decode_time_s for r in rows]
        dt = [60.0 if r.decode_time_s is None else r.decode_time_s for r in rows]
        s = table.stats("corridor_disjoint", strategy)
        assert s.throughput.mean == pytest.approx(float(np.mean(thr)), rel=1e-12)
        assert s.throughput.std == pytest.approx(float(np.std(thr, ddof=1)), rel=1e-12)
        assert s.decode_time.max == pytest.approx(max(dt), rel=1e-12)
        assert s.failure_rate == sum(r.decode_time_s is None for r in rows) / len(rows)
    assert "fullcache" in table.summary()


def test_undecoded_runs_score_zero_and_count_as_failures():
    text = CSV_HEADER + "\n1,fullcache,corridor_disjoint,0.3,7,,10,0.5,100,0,\n" \
                        "2,fullcache,corridor_disjoint,0.3,7,2.000000,10,0.5,100,0,\n"
    table = ResultTable.from_csv(text, 1000, 60.0)
    s = table.stats("corridor_disjoint", "fullcache")
    assert s.throughput.mean == 250.0 and s.failure_rate == 0.5 and s.decode_time.mean == 31.0


def test_aggregate_and_comparison_math():
    a = Aggregate.of([1.0, 2.0, 3.0, 4.0])
    assert a.mean == 2.5 and a.std == pytest.approx(math.sqrt(5 / 3)) and a.se == pytest.approx(a.std / 2)
    c = Comparison("throughput", "a", "b", 110.0, 100.0, 3.0, 4.0)
    assert c.diff == 10.0 and c.se == 5.0 and c.greater() and c.relative == pytest.approx(0.1)
    assert c.within(DEFAULT_BAND) and not c.within(0.05)
    assert c.ci95 == pytest.approx((0.2, 19.8))


def test_lossless_coded_strategies_need_exactly_m_innovative_blocks():
    for s in (K.SOURCE_ONLY, K.FULL_CACHE, K.UNRESTRICTED):
        r = run(ScenarioConfig(loss=0.0, seed=3, strategy=s))
        store = r.nodes[7].files["F0"]
        assert store.complete and store.innovative == 16


def test_paired_seeds_share_mobility():
    traces = []
    for s in (K.NO_CODING, K.FULL_CACHE):
        r = run(ScenarioConfig(topology=TopologyKind.RANDOM_WAYPOINT, loss=0.3, seed=6, horizon=80, strategy=s))
        traces.append([line for line in r.trace if " mob " in line])
    n = min(map(len, traces))
    assert n > 10 and traces[0][:n] == traces[1][:n]


def test_hypotheses_need_ten_seeds():
    table = run_experiment(_small(seeds=range(1, 4)), echo=None)
    with pytest.raises(InsufficientSeeds):
        evaluate(table)


def test_hypothesis_report_and_nocoding_slowest():
    table = run_experiment(_small(), echo=None)
    report = evaluate(table)
    [res] = report.results
    assert res.h1.a == "fullcache" and res.h1.b == "sourceonly"
    text = report.text()
    assert "H1" in text and "H2" in text and "95% CI" in text
    nc = compare(table, "corridor_disjoint", "nocoding", "fullcache", "decode_time")
    assert nc.diff > 0
    for s in ("sourceonly", "unrestricted"):
        assert table.stats("corridor_disjoint", "nocoding").decode_time.mean >= \
            table.stats("corridor_disjoint", s).decode_time.mean


def test_run_errors_are_annotated(monkeypatch):
    import cbnc.harness as h

    def boom(cfg):
        raise RuntimeError("kaput")

    monkeypatch.setattr(h, "run", boom)
    with pytest.raises(RunError) as err:
        run_experiment(_small(seeds=(5,), strategies=(K.FULL_CACHE,)), echo=None)
    assert err.value.seed == 5 and "fullcache" in str(err.value)

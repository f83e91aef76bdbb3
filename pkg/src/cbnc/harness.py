"""Experiment presets, seed sweeps, aggregation and the strategy hypotheses."""
from __future__ import annotations

import csv
import io
import math
import warnings
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientSeeds, RunError
from .sim.run import CSV_HEADER, MetricRecord, run
from .sim.scenario import ScenarioConfig
from .sim.topology import TopologyKind
from .strategy import ALL_STRATEGIES, StrategyKind

MIN_SEEDS = 10
DEFAULT_BAND = 0.15


@dataclass
class ExperimentSpec:
    name: str
    base: ScenarioConfig
    strategies: tuple[StrategyKind, ...] = ALL_STRATEGIES
    seeds: tuple[int, ...] = tuple(range(1, 21))
    topologies: tuple[TopologyKind, ...] = ()
    out: Path | None = None
    band: float = DEFAULT_BAND
    workers: int = 1
    save_traces: bool = False

    def __post_init__(self) -> None:
        self.strategies = tuple(self.strategies)
        self.seeds = tuple(self.seeds)
        self.topologies = tuple(self.topologies) or (self.base.topology,)

    @property
    def loss(self) -> float:
        return self.base.loss

    def configs(self) -> list[tuple[tuple[str, int, int], ScenarioConfig]]:
        """Every run of the sweep, keyed for deterministic ordering."""
        out = []
        for ti, topo in enumerate(self.topologies):
            for si, strategy in enumerate(self.strategies):
                for seed in self.seeds:
                    cfg = self.base.replace(topology=topo, strategy=strategy, seed=seed,
                                            trace=self.save_traces)
                    out.append(((topo.value, si, seed), cfg))
        return out

    def file_bits(self, topology: TopologyKind) -> int:
        files = 1 if topology.is_corridor else self.base.publishers
        return files * self.base.file_bytes * 8


def preset_corridor30(seeds: Iterable[int] = range(1, 21)) -> ExperimentSpec:
    """Both corridor variants at 30% loss, one publisher, one receiver, all four strategies."""
    base = ScenarioConfig(topology=TopologyKind.CORRIDOR_DISJOINT, loss=0.30, m=16, block_size=1024,
                          horizon=60.0)
    return ExperimentSpec("corridor30", base, ALL_STRATEGIES, tuple(seeds),
                          (TopologyKind.CORRIDOR_DISJOINT, TopologyKind.CORRIDOR_INTERFERING))


def preset_mobile10(seeds: Iterable[int] = range(1, 21)) -> ExperimentSpec:
    """Ten random-waypoint nodes: three publishers (one file each), seven receivers wanting everything."""
    base = ScenarioConfig(topology=TopologyKind.RANDOM_WAYPOINT, loss=0.30, m=16, block_size=1024,
                          horizon=300.0, nodes=10, publishers=3, receivers=7)
    return ExperimentSpec("mobile10", base, ALL_STRATEGIES, tuple(seeds))


PRESETS: dict[str, Callable[..., ExperimentSpec]] = {
    "corridor30": preset_corridor30,
    "mobile10": preset_mobile10,
}


# --- aggregation -------------------------------------------------------------


@dataclass(frozen=True)
class Aggregate:
    n: int
    mean: float
    std: float
    min: float
    max: float

    @property
    def se(self) -> float:
        return self.std / math.sqrt(self.n) if self.n > 1 else float("nan")

    @classmethod
    def of(cls, values: Sequence[float]) -> Aggregate:
        if not values:
            nan = float("nan")
            return cls(0, nan, nan, nan, nan)
        a = np.asarray(values, dtype=float)
        std = float(a.std(ddof=1)) if len(a) > 1 else 0.0
        return cls(len(a), float(a.mean()), std, float(a.min()), float(a.max()))


@dataclass
class Row:
    seed: int
    strategy: str
    topology: str
    loss: float
    receiver: int
    decode_time_s: float | None
    blocks_tx: int
    innovative_ratio: float
    bytes_tx: int
    polluted: bool
    accused: str

    @classmethod
    def parse(cls, rec: dict[str, str]) -> Row:
        dt = rec["decode_time_s"]
        return cls(int(rec["seed"]), rec["strategy"], rec["topology"], float(rec["loss"]),
                   int(rec["receiver"]), float(dt) if dt else None, int(rec["blocks_tx"]),
                   float(rec["innovative_ratio"]), int(rec["bytes_tx"]), rec["polluted"] == "1",
                   rec["accused"])


@dataclass
class GroupStats:
    topology: str
    strategy: str
    runs: int
    seeds: int
    failures: int
    decode_time: Aggregate
    throughput: Aggregate

    @property
    def failure_rate(self) -> float:
        return self.failures / self.runs if self.runs else float("nan")


@dataclass
class ResultTable:
    """Per-(strategy, seed, receiver) rows plus aggregates recomputed from them.

    Rows hold exactly what the CSV holds, so aggregates recomputed from a
    written CSV match these bit for bit. Undecoded receivers score throughput
    0 and a decode time censored at the horizon.
    """

    rows: list[Row] = field(default_factory=list)
    file_bits: dict[str, int] = field(default_factory=dict)
    horizon: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_csv(cls, text: str, file_bits: dict[str, int] | int | None = None,
                 horizon: dict[str, float] | float | None = None) -> ResultTable:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or ",".join(reader.fieldnames) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames!r}")
        rows = [Row.parse(rec) for rec in reader]
        table = cls(rows)
        for topo in {r.topology for r in rows}:
            kind = TopologyKind(topo)
            default_bits = (1 if kind.is_corridor else 3) * 16 * 1024 * 8
            default_horizon = 60.0 if kind.is_corridor else 300.0
            table.file_bits[topo] = (file_bits.get(topo, default_bits) if isinstance(file_bits, dict)
                                     else file_bits or default_bits)
            table.horizon[topo] = (horizon.get(topo, default_horizon) if isinstance(horizon, dict)
                                   else horizon or default_horizon)
        return table

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for r in self.rows:
            dt = "" if r.decode_time_s is None else f"{r.decode_time_s:.6f}"
            buf.write(f"{r.seed},{r.strategy},{r.topology},{r.loss:g},{r.receiver},{dt},{r.blocks_tx},"
                      f"{r.innovative_ratio:.6f},{r.bytes_tx},{int(r.polluted)},{r.accused}\n")
        return buf.getvalue()

    def __len__(self) -> int:
        return len(self.rows)

    def topologies(self) -> list[str]:
        return sorted({r.topology for r in self.rows})

    def strategies(self, topology: str | None = None) -> list[str]:
        return sorted({r.strategy for r in self.rows if topology is None or r.topology == topology})

    def select(self, topology: str, strategy: str) -> list[Row]:
        return [r for r in self.rows if r.topology == topology and r.strategy == strategy]

    def throughput(self, row: Row) -> float:
        if row.decode_time_s is None or row.decode_time_s <= 0:
            return 0.0
        return self.file_bits[row.topology] / row.decode_time_s

    def decode_time(self, row: Row) -> float:
        return self.horizon[row.topology] if row.decode_time_s is None else row.decode_time_s

    def stats(self, topology: str, strategy: str) -> GroupStats:
        rows = self.select(topology, strategy)
        return GroupStats(
            topology, strategy, len(rows), len({r.seed for r in rows}),
            sum(r.decode_time_s is None for r in rows),
            Aggregate.of([self.decode_time(r) for r in rows]),
            Aggregate.of([self.throughput(r) for r in rows]),
        )

    def summary(self) -> str:
        lines = [f"{'topology':<22}{'strategy':<14}{'runs':>5}{'fail%':>7}"
                 f"{'decode_s mean':>15}{'sd':>9}{'thr_bps mean':>15}{'se':>11}{'min':>11}{'max':>11}"]
        for topo in self.topologies():
            for strat in _strategy_order(self.strategies(topo)):
                g = self.stats(topo, strat)
                lines.append(f"{topo:<22}{strat:<14}{g.runs:>5}{100 * g.failure_rate:>7.1f}"
                             f"{g.decode_time.mean:>15.4f}{g.decode_time.std:>9.4f}"
                             f"{g.throughput.mean:>15.1f}{g.throughput.se:>11.1f}"
                             f"{g.throughput.min:>11.1f}{g.throughput.max:>11.1f}")
        return "\n".join(lines)


def _strategy_order(names: Iterable[str]) -> list[str]:
    rank = {k.value: i for i, k in enumerate(ALL_STRATEGIES)}
    return sorted(names, key=lambda s: (rank.get(s, len(rank)), s))


# --- running -----------------------------------------------------------------


def _run_one(key, cfg: ScenarioConfig):
    try:
        return key, run(cfg)
    except Exception as exc:  # annotate and re-raise on the caller's thread
        raise RunError(cfg.topology.value, cfg.strategy_label, cfg.seed, exc) from exc


def run_experiment(spec: ExperimentSpec, echo: Callable[[str], None] | None = print) -> ResultTable:
    """Execute every (topology, strategy, seed) run, write the CSV, print a summary."""
    if not spec.seeds or not spec.strategies:
        warnings.warn(f"experiment {spec.name!r} has no seeds or strategies; nothing to run", stacklevel=2)
        return ResultTable()
    jobs = spec.configs()
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            done = list(pool.map(lambda job: _run_one(*job), jobs))
    else:
        done = [_run_one(*job) for job in jobs]
    done.sort(key=lambda kr: kr[0])
    records: list[MetricRecord] = [m for _, result in done for m in result.metrics]
    text = CSV_HEADER + "\n" + "".join(m.csv_row() + "\n" for m in records)
    bits = {t.value: spec.file_bits(t) for t in spec.topologies}
    horizon = {t.value: spec.base.horizon for t in spec.topologies}
    table = ResultTable.from_csv(text, bits, horizon)
    if spec.out is not None:
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{spec.name}.csv").write_text(text)
        if spec.save_traces:
            traces = out / "traces"
            traces.mkdir(exist_ok=True)
            for (topo, _, seed), result in done:
                name = f"{topo}_{result.config.strategy_label}_{seed}.trace"
                (traces / name).write_text(result.trace_text())
    if echo is not None:
        echo(table.summary())
    return table


# --- hypotheses --------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    """Mean difference ``a - b`` with the standard error of that difference."""

    metric: str
    a: str
    b: str
    mean_a: float
    mean_b: float
    se_a: float
    se_b: float

    @property
    def diff(self) -> float:
        return self.mean_a - self.mean_b

    @property
    def se(self) -> float:
        return math.hypot(self.se_a, self.se_b)

    @property
    def ci95(self) -> tuple[float, float]:
        return self.diff - 1.96 * self.se, self.diff + 1.96 * self.se

    @property
    def relative(self) -> float:
        """|a - b| over the smaller mean (the stricter of the two possible readings)."""
        lo = min(abs(self.mean_a), abs(self.mean_b))
        return abs(self.diff) / lo if lo > 0 else (0.0 if self.diff == 0 else float("inf"))

    def greater(self) -> bool:
        """``a`` beats ``b`` by more than one standard error of the difference."""
        return self.diff > self.se

    def within(self, band: float) -> bool:
        return self.relative <= band


def compare(table: ResultTable, topology: str, a: str, b: str, metric: str = "throughput") -> Comparison:
    ga, gb = table.stats(topology, a), table.stats(topology, b)
    sa, sb = getattr(ga, metric), getattr(gb, metric)
    return Comparison(metric, a, b, sa.mean, sb.mean, sa.se, sb.se)


@dataclass
class HypothesisResult:
    topology: str
    h1: Comparison
    h2: Comparison
    band: float
    extra: list[Comparison] = field(default_factory=list)

    @property
    def h1_holds(self) -> bool:
        return self.h1.greater()

    @property
    def h2_holds(self) -> bool:
        return self.h2.within(self.band)


@dataclass
class HypothesisReport:
    results: list[HypothesisResult]

    def text(self) -> str:
        out = []
        for r in self.results:
            h1, h2 = r.h1, r.h2
            lo, hi = h1.ci95
            out.append(f"[{r.topology}]")
            out.append(f"  H1 fullcache > sourceonly (throughput): {'TRUE' if r.h1_holds else 'FALSE'}  "
                       f"means {h1.mean_a:.1f} vs {h1.mean_b:.1f} bps, diff {h1.diff:.1f} +/- {h1.se:.1f} (SE), "
                       f"95% CI [{lo:.1f}, {hi:.1f}]")
            out.append(f"  H2 |fullcache - unrestricted| within {100 * r.band:.0f}%: "
                       f"{'TRUE' if r.h2_holds else 'FALSE'}  means {h2.mean_a:.1f} vs {h2.mean_b:.1f} bps, "
                       f"relative gap {100 * h2.relative:.1f}% (SE of diff {h2.se:.1f})")
            for c in r.extra:
                out.append(f"  {c.metric}: {c.a} {c.mean_a:.4g} (se {c.se_a:.3g}) vs {c.b} {c.mean_b:.4g} "
                           f"(se {c.se_b:.3g})")
        return "\n".join(out)


def test_hypotheses(table: ResultTable, band: float = DEFAULT_BAND) -> HypothesisReport:
    """H1 (full-cache beats source-only) and H2 (full-cache comparable to unrestricted) per topology."""
    results = []
    needed = (StrategyKind.FULL_CACHE.value, StrategyKind.SOURCE_ONLY.value, StrategyKind.UNRESTRICTED.value)
    for topo in table.topologies():
        for strat in needed:
            seeds = table.stats(topo, strat).seeds
            if seeds < MIN_SEEDS:
                raise InsufficientSeeds(f"{topo}/{strat}: {seeds} seeds, need at least {MIN_SEEDS}")
        fc, so, un = needed
        extra = [compare(table, topo, fc, un, "decode_time")]
        if StrategyKind.NO_CODING.value in table.strategies(topo):
            extra.append(compare(table, topo, StrategyKind.NO_CODING.value, fc, "decode_time"))
        results.append(HypothesisResult(topo, compare(table, topo, fc, so), compare(table, topo, fc, un),
                                        band, extra))
    return HypothesisReport(results)


test_hypotheses.__test__ = False  # not a pytest test despite the name

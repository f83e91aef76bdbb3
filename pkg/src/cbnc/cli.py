"""Command-line entry point: ``cbnc run | hypotheses | trace``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import CbncError, ConfigInvalid, RunError
from .harness import DEFAULT_BAND, PRESETS, ExperimentSpec, ResultTable, run_experiment, test_hypotheses
from .integrity import AttackMode
from .sim.scenario import load_config
from .strategy import StrategyKind


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"3"``, ``"1..20"`` (inclusive) or ``"1,4,9"``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}; use a..b or a,b,c") from None


def parse_strategies(text: str) -> tuple[StrategyKind, ...]:
    try:
        return tuple(StrategyKind.parse(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_jam(text: str) -> tuple[float, float, float]:
    try:
        start, end, loss = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad jam window {text!r}; use start,end,loss") from None
    return start, end, loss


def parse_attacker(text: str) -> tuple[int, AttackMode, float]:
    try:
        node, mode, rate = text.split(",")
        return int(node), AttackMode(mode.strip().lower()), float(rate)
    except ValueError:
        modes = "|".join(m.value for m in AttackMode)
        raise argparse.ArgumentTypeError(f"bad attacker {text!r}; use node,{modes},rate") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbnc", description="Coded content dissemination simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a preset or a scenario config over a seed sweep")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", type=Path, help="flat key = value scenario file")
    r.add_argument("--seeds", type=parse_seeds, help="a..b inclusive, or a comma list")
    r.add_argument("--strategy", type=parse_strategies, help="comma list of strategies")
    r.add_argument("--out", type=Path, help="directory for the CSV (and traces)")
    r.add_argument("--jam", type=parse_jam, metavar="START,END,LOSS")
    r.add_argument("--attacker", type=parse_attacker, metavar="NODE,MODE,RATE")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--traces", action="store_true", help="also write one trace file per run")
    r.add_argument("--band", type=float, default=DEFAULT_BAND, help="H2 comparability band")

    h = sub.add_parser("hypotheses", help="evaluate H1/H2 on a metrics CSV")
    h.add_argument("--in", dest="path", type=Path, required=True)
    h.add_argument("--band", type=float, default=DEFAULT_BAND)
    h.add_argument("--horizon", type=float, help="censoring time for undecoded runs")
    h.add_argument("--file-bits", type=int, help="bits each receiver downloads")

    t = sub.add_parser("trace", help="filter a trace file to one node's events")
    t.add_argument("--in", dest="path", type=Path, required=True)
    t.add_argument("--follow-node", type=int, required=True)
    return p


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    if args.preset:
        spec = PRESETS[args.preset]()
    else:
        base = load_config(args.config)
        spec = ExperimentSpec(args.config.stem, base, (base.strategy,), (base.seed,))
    base = spec.base
    if args.jam:
        start, end, loss = args.jam
        base = base.replace(jam_start=start, jam_end=end, jam_loss=loss)
    if args.attacker:
        node, mode, rate = args.attacker
        base = base.replace(attacker_node=node, attack_mode=mode, attack_rate=rate)
    spec.base = base.validate()
    if args.seeds is not None:
        spec.seeds = args.seeds
    if args.strategy is not None:
        spec.strategies = args.strategy
    spec.out = args.out
    spec.workers = max(1, args.workers)
    spec.save_traces = args.traces
    spec.band = args.band
    return spec


def cmd_run(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    table = run_experiment(spec)
    if args.out:
        print(f"wrote {Path(args.out) / (spec.name + '.csv')} ({len(table)} rows)")
    return 0


def cmd_hypotheses(args: argparse.Namespace) -> int:
    table = ResultTable.from_csv(args.path.read_text(), args.file_bits, args.horizon)
    print(table.summary())
    print(test_hypotheses(table, args.band).text())
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    node = str(args.follow_node)
    with args.path.open() as fh:
        for line in fh:
            parts = line.split(maxsplit=2)
            if len(parts) >= 2 and parts[1] in (node, "-"):
                sys.stdout.write(line)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"run": cmd_run, "hypotheses": cmd_hypotheses, "trace": cmd_trace}
    try:
        return handlers[args.command](args)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CbncError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

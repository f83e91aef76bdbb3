from __future__ import annotations

import argparse
import subprocess
import sys

import pytest

from cbnc.cli import main, parse_attacker, parse_jam, parse_seeds
from cbnc.integrity import AttackMode


def test_parse_helpers():
    assert parse_seeds("1..3") == (1, 2, 3) and parse_seeds("4,9") == (4, 9) and parse_seeds("7") == (7,)
    assert parse_jam("1,2,0.9") == (1.0, 2.0, 0.9)
    assert parse_attacker("2,coeff,0.5") == (2, AttackMode.CORRUPT_COEFFICIENTS, 0.5)
    for bad, fn in (("3..1", parse_seeds), ("x", parse_seeds), ("1,2", parse_jam), ("1,zap,1", parse_attacker)):
        with pytest.raises(argparse.ArgumentTypeError):
            fn(bad)


def test_run_config_then_trace_and_hypotheses(tmp_path, capsys):
    cfg = tmp_path / "demo.cfg"
    cfg.write_text("topology = disjoint\nstrategy = fullcache\nloss = 0.3\nseed = 2\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--traces"]) == 0
    assert (out / "demo.csv").read_text().count("\n") == 2
    [trace] = (out / "traces").iterdir()
    capsys.readouterr()
    assert main(["trace", "--in", str(trace), "--follow-node", "7"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.split()[1] in ("7", "-") for line in lines)
    # a single seed is not enough for a comparative claim
    assert main(["hypotheses", "--in", str(out / "demo.csv")]) == 1


def test_run_preset_sweep_and_hypotheses(tmp_path, capsys):
    out = tmp_path / "o"
    args = ["run", "--preset", "corridor30", "--seeds", "1..10", "--strategy", "fullcache,sourceonly,unrestricted",
            "--out", str(out)]
    assert main(args) == 0
    capsys.readouterr()
    assert main(["hypotheses", "--in", str(out / "corridor30.csv")]) == 0
    text = capsys.readouterr().out
    assert "[corridor_disjoint]" in text and "[corridor_interfering]" in text and "H1" in text


def test_run_with_attacker_and_jam(tmp_path):
    out = tmp_path / "a"
    args = ["run", "--preset", "corridor30", "--seeds", "1", "--strategy", "unrestricted",
            "--attacker", "1,payload,1.0", "--jam", "0,0.1,0.5", "--out", str(out)]
    assert main(args) == 0
    rows = (out / "corridor30.csv").read_text().splitlines()[1:]
    assert len(rows) == 2


def test_usage_and_config_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["run", "--preset", "nope"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("loss = 7\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "loss" in capsys.readouterr().err
    assert main(["trace", "--in", str(tmp_path / "missing"), "--follow-node", "1"]) == 1


def test_console_module_entry():
    proc = subprocess.run([sys.executable, "-m", "cbnc.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "hypotheses" in proc.stdout

from __future__ import annotations

import numpy as np
import pytest

from cbnc.field import GF256, FieldSpec


def slow_mul(a: int, b: int, poly: int = 0x11B) -> int:
    """Shift-and-add multiply in GF(2^8), no tables (independent oracle)."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= poly
    return out


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(params=["gf256", "prime:257", "prime:65521"])
def spec(request) -> FieldSpec:
    return FieldSpec.parse(request.param)


__all__ = ["GF256", "VERDICTS", "slow_mul"]


VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one acceptance line: ``verdict(n, title, ok, detail)``."""

    def record(n: int, title: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}: {detail}"
        VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)

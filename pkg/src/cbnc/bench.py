"""Compare the compiled and numpy GF(2^8) kernels on coding-sized workloads.

Run with ``python -m cbnc.bench``.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from . import kernels


def _workloads(backend, m: int, width: int, rng: np.random.Generator):
    rows = rng.integers(0, 256, (m, width), dtype=np.uint8)
    coeffs = rng.integers(1, 256, m, dtype=np.uint8)
    left = rng.integers(0, 256, (m, m), dtype=np.uint8)
    dst = rng.integers(0, 256, width, dtype=np.uint8)

    # a full-rank RREF basis to reduce against
    basis = np.zeros((m, width), dtype=np.uint8)
    for i in range(m):
        basis[i, i] = 1
        basis[i, m:] = rows[i, m:]
    pivots = np.arange(m, dtype=np.intp)

    def axpy():
        backend.axpy(dst, 0x53, rows[0])

    def lincomb():
        backend.lincomb(coeffs, rows)

    def matmul():
        backend.matmul(left, rows)

    def reduce_row():
        row = rows[1].copy()
        backend.reduce_row(row, basis, pivots, m)

    return {"axpy": axpy, "lincomb": lincomb, "matmul": matmul, "reduce_row": reduce_row}


def run_benchmark(m: int = 16, width: int = 16 + 1024, repeat: int = 5, number: int = 200,
                  seed: int = 0) -> dict[str, dict[str, float]]:
    """Best-of-``repeat`` microseconds per call, per kernel and backend."""
    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    results: dict[str, dict[str, float]] = {}
    for name, backend in backends.items():
        work = _workloads(backend, m, width, np.random.default_rng(seed))
        results[name] = {k: 1e6 * min(timeit.repeat(fn, repeat=repeat, number=number)) / number
                         for k, fn in work.items()}
    return results


def format_results(results: dict[str, dict[str, float]]) -> str:
    names = list(results)
    kernels_ = list(next(iter(results.values())))
    head = f"{'kernel':<12}" + "".join(f"{n + ' us':>14}" for n in names)
    if "cython" in results:
        head += f"{'speedup':>10}"
    lines = [head]
    for k in kernels_:
        line = f"{k:<12}" + "".join(f"{results[n][k]:>14.2f}" for n in names)
        if "cython" in results:
            line += f"{results['python'][k] / results['cython'][k]:>9.1f}x"
        lines.append(line)
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--block-size", type=int, default=1024)
    p.add_argument("--number", type=int, default=200)
    args = p.parse_args(argv)
    print(f"active backend: {kernels.BACKEND}")
    print(format_results(run_benchmark(args.m, args.m + args.block_size, number=args.number)))


if __name__ == "__main__":
    main()

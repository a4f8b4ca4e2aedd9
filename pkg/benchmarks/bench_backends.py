#!/usr/bin/env python3
"""Benchmark the compiled interval-index backend against the pure-Python one.

Times the three bulk split drivers (distribution-driven, direct k-of-max,
largest-interval) and the two O(log n) queries (quantile lookup and one-sided
size-biased mass) on every backend available in this build, then prints a
per-operation table with the compiled/pure speedup.

Usage:
    python3 benchmarks/bench_backends.py [--steps N] [--queries N] [--seed S]
"""

import argparse
import time

import numpy as np

from psisplit.interval_engine import IntervalSet, available_backends
from psisplit.psi_model import preset
from psisplit.rng import DrawBuffer, stream_for


def bench_driver(backend: str, driver: str, n_steps: int, seed: int) -> float:
    """Return microseconds per split step for one bulk driver."""
    iset = IntervalSet((0.25, 0.5, 0.75), alpha=0.5, backend=backend,
                       audit_interval=0)
    buf = DrawBuffer(stream_for(seed, 0))
    alphas = np.array([0.5])
    counts = np.zeros(1, dtype=np.int64)
    t0 = time.perf_counter()
    if driver == "psi(uniform)":
        ks, ps = preset("uniform").terms()
        iset._mod.advance_psi(iset._idx, buf, ks, ps, n_steps, alphas, counts)
    elif driver == "direct(max-2)":
        iset._mod.advance_direct(iset._idx, buf, 2, True, n_steps, alphas,
                                 counts)
    else:
        iset._mod.advance_kakutani(iset._idx, buf, n_steps, alphas, counts)
    return (time.perf_counter() - t0) / n_steps * 1e6


def bench_queries(backend: str, n_steps: int, n_queries: int,
                  seed: int) -> dict[str, float]:
    """Return microseconds per query on a tree with ~n_steps intervals."""
    iset = IntervalSet((0.25, 0.5, 0.75), alpha=0.5, backend=backend,
                       audit_interval=0)
    buf = DrawBuffer(stream_for(seed, 0))
    ks, ps = preset("uniform").terms()
    iset._mod.advance_psi(iset._idx, buf, ks, ps, n_steps,
                          np.array([0.5]), np.zeros(1, dtype=np.int64))
    us = np.random.default_rng(seed).random(n_queries)
    t0 = time.perf_counter()
    for u in us:
        iset.quantile(float(u))
    t_quant = (time.perf_counter() - t0) / n_queries * 1e6
    t0 = time.perf_counter()
    for u in us:
        iset.size_biased_mass(float(u))
    t_mass = (time.perf_counter() - t0) / n_queries * 1e6
    return {"quantile": t_quant, "size_biased_mass": t_mass}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=100_000,
                    help="split steps per driver (default 100000)")
    ap.add_argument("--queries", type=int, default=20_000,
                    help="lookups per query benchmark (default 20000)")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    backends = available_backends()
    rows: dict[str, dict[str, float]] = {}
    for driver in ("psi(uniform)", "direct(max-2)", "kakutani"):
        rows[driver] = {b: bench_driver(b, driver, args.steps, args.seed)
                        for b in backends}
    for b in backends:
        for name, usec in bench_queries(b, args.steps, args.queries,
                                        args.seed).items():
            rows.setdefault(name, {})[b] = usec

    width = max(len(r) for r in rows) + 2
    header = f"{'operation':<{width}}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(f"{args.steps} split steps per driver, {args.queries} queries, "
          f"times in µs/op")
    print(header)
    print("-" * len(header))
    for name, cols in rows.items():
        line = f"{name:<{width}}" + "".join(f"{cols[b]:>12.3f}"
                                            for b in backends)
        if len(backends) == 2:
            line += f"{cols[backends[1]] / cols[backends[0]]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()

"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two grid-search kernels on random maps, then a full episode on
each backend. Run from the repository root:

    python benchmarks/bench_kernels.py [--episodes]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from fronsim import kernels
from fronsim.config import RunConfig
from fronsim.episode import run_episode
from fronsim.grid import CellState
from fronsim.variants import Variant


def random_cells(rng: np.random.Generator, side: int, p_occ: float = 0.25) -> np.ndarray:
    cells = np.where(
        rng.random((side, side)) < p_occ, np.int8(CellState.OCC), np.int8(CellState.FREE)
    )
    cells[0, 0] = int(CellState.FREE)
    return cells


def time_kernel(fn, args_list, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_searches(side: int, n_instances: int = 200) -> None:
    rng = np.random.default_rng(7)
    maps = [random_cells(rng, side) for _ in range(n_instances)]
    bfs_args = [(m, 0, 0) for m in maps]
    blocked = np.zeros((side, side), dtype=np.uint8)
    astar_args = [(m, blocked, 0, 0, side - 1, side - 1) for m in maps]

    rows = []
    for name, module in (("python", kernels._py), ("native", kernels._native)):
        if module is None:
            continue
        bfs = time_kernel(module.bfs_fill, bfs_args)
        astar = time_kernel(module.astar_first_step, astar_args)
        rows.append((name, bfs, astar))
    print(f"\n{side}x{side} grid, {n_instances} instances (seconds, best of 3):")
    print(f"  {'backend':8s} {'bfs_fill':>10s} {'astar':>10s}")
    for name, bfs, astar in rows:
        print(f"  {name:8s} {bfs:10.4f} {astar:10.4f}")
    if len(rows) == 2:
        print(
            f"  speedup  {rows[0][1] / rows[1][1]:9.1f}x {rows[0][2] / rows[1][2]:9.1f}x"
        )


def bench_episode() -> None:
    config = RunConfig()
    config.scenario.width = 40
    config.scenario.height = 40
    config.scenario.n_robots = 4
    config.scenario.n_dynamic = 32
    config.scenario.seed = 5
    variant = Variant(family="full", gate_init="cold")

    print("\nfull 40x40 episode, 4 robots, 32 dynamic obstacles:")
    results = {}
    for backend in kernels.available_backends():
        kernels.use_backend(backend)
        times = []
        for _ in range(3):
            start = time.perf_counter()
            record = run_episode(config, variant)
            times.append(time.perf_counter() - start)
        results[backend] = (statistics.median(times), record.n_steps)
        print(f"  {backend:8s} {results[backend][0]:8.3f} s   ({record.n_steps} steps)")
    kernels.use_backend("native" if "native" in kernels.available_backends() else "python")
    if len(results) == 2:
        print(f"  speedup  {results['python'][0] / results['native'][0]:7.1f}x")


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument(
        "--episodes", action="store_true", help="also time full episodes (slower)"
    )
    args = parser.parse_args()
    print(f"kernel backends available: {kernels.available_backends()}")
    for side in (20, 40, 80):
        bench_searches(side)
    if args.episodes:
        bench_episode()


if __name__ == "__main__":
    main()

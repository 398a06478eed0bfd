"""Experiment matrix execution: (variant x seed) grids, a bounded worker
pool, and deterministic CSV output.

The CSV holds one row per episode plus per-variant aggregate rows, with the
columns: variant, seed, SR, EL, overlap, recoveries, planner_fraction,
wall_time. Wall-clock timing is off by default so that reruns of the same
matrix on the same build are byte-identical; pass ``timing=True`` to record
real times instead.
"""

from __future__ import annotations

import dataclasses
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .config import RunConfig
from .episode import run_episode_with_metrics
from .metrics import AggregateMetrics, EpisodeMetrics, summarize
from .variants import Variant

logger = logging.getLogger(__name__)

WORKERS_ENV = "FRONSIM_WORKERS"


@dataclass(frozen=True)
class MatrixRow:
    variant: str
    seed: int
    metrics: Optional[EpisodeMetrics]  # None when the episode crashed
    error: Optional[str] = None


@dataclass
class MatrixResult:
    rows: list[MatrixRow]
    aggregates: dict[str, AggregateMetrics]


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV, "").strip()
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _job(payload: tuple[dict, Variant, int, bool]) -> tuple[str, int, Optional[EpisodeMetrics], Optional[str]]:
    config_state, variant, seed, timing = payload
    config = _config_from_state(config_state)
    config.scenario.seed = seed
    try:
        _, m = run_episode_with_metrics(config, variant, timing=timing)
        return variant.tag, seed, m, None
    except Exception as exc:  # pragma: no cover - exercised via fault injection
        return variant.tag, seed, None, f"{type(exc).__name__}: {exc}"


def _config_state(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def _config_from_state(state: dict) -> RunConfig:
    config = RunConfig()
    for section, values in state.items():
        target = getattr(config, section)
        for key, value in values.items():
            setattr(target, key, value)
    config.__post_init__()
    return config


def run_matrix(
    config: RunConfig,
    variants: Sequence[Variant],
    seeds: Sequence[int],
    workers: Optional[int] = None,
    timing: bool = False,
) -> MatrixResult:
    """Run every (variant, seed) pair and aggregate per variant.

    Episodes that raise are logged and counted as failures (SR only); output
    row order is the submission order regardless of completion order.
    """
    workers = workers if workers is not None else default_workers()
    jobs = [
        (_config_state(config), variant, int(seed), timing)
        for variant in variants
        for seed in seeds
    ]
    if workers <= 1 or len(jobs) <= 1:
        results = [_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (workers * 8) or 1)))

    rows: list[MatrixRow] = []
    for tag, seed, m, error in results:
        if error is not None:
            logger.warning("episode %s seed %d failed: %s", tag, seed, error)
        rows.append(MatrixRow(variant=tag, seed=seed, metrics=m, error=error))

    aggregates: dict[str, AggregateMetrics] = {}
    for variant in variants:
        batch: list[EpisodeMetrics] = []
        for row in rows:
            if row.variant != variant.tag:
                continue
            if row.metrics is not None:
                batch.append(row.metrics)
            else:
                batch.append(
                    EpisodeMetrics(
                        success=False,
                        t_star=None,
                        el=None,
                        overlap=None,
                        j=None,
                        recoveries=0,
                        planner_fraction=0.0,
                        collisions=0,
                        steps=0,
                    )
                )
        aggregates[variant.tag] = summarize(batch)
    return MatrixResult(rows=rows, aggregates=aggregates)


CSV_HEADER = "variant,seed,SR,EL,overlap,recoveries,planner_fraction,wall_time"


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"{value:.6f}"


def to_csv(result: MatrixResult) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for row in result.rows:
        m = row.metrics
        if m is None:
            out.write(f"{row.variant},{row.seed},0.000000,,,,,\n")
            continue
        out.write(
            ",".join(
                (
                    row.variant,
                    str(row.seed),
                    _fmt(1.0 if m.success else 0.0),
                    _fmt(float(m.el) if m.el is not None else None),
                    _fmt(m.overlap),
                    _fmt(float(m.recoveries)),
                    _fmt(m.planner_fraction),
                    _fmt(m.wall_time),
                )
            )
            + "\n"
        )
    for tag in sorted(result.aggregates):
        agg = result.aggregates[tag]
        out.write(
            ",".join(
                (
                    tag,
                    "aggregate",
                    _fmt(agg.sr),
                    _fmt(agg.el_mean),
                    _fmt(agg.overlap_mean),
                    _fmt(agg.recoveries_mean),
                    _fmt(agg.planner_fraction_mean),
                    _fmt(agg.wall_time_total),
                )
            )
            + "\n"
        )
    return out.getvalue()


def write_csv(result: MatrixResult, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(to_csv(result))

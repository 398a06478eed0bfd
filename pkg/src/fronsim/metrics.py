"""Episode scoring and aggregation.

All metrics are pure functions of an EpisodeRecord, so recomputing them from
a serialized log reproduces the values bit-exactly (see the ``replay`` CLI
subcommand).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Optional, Sequence

from .errors import ConfigurationError, UndefinedMetricError
from .grid import Action, Cell

TERMINAL_COMPLETE = "complete"
TERMINAL_HORIZON = "horizon"
TERMINAL_CONTACT = "contact"


@dataclass(frozen=True)
class RobotStepLog:
    pose: Cell
    action: int
    switch: int
    p: float
    recovering: bool
    risk_events: int
    contact: bool
    planner_ok: bool


@dataclass(frozen=True)
class StepLog:
    t: int
    robots: tuple[RobotStepLog, ...]
    newly_known: int


@dataclass
class EpisodeRecord:
    """Append-only per-step log of one episode plus its terminal outcome."""

    width: int
    height: int
    n_robots: int
    seed: int
    variant: str
    horizon: int
    steps: list[StepLog] = field(default_factory=list)
    t_star: Optional[int] = None
    success: bool = False
    terminal: str = TERMINAL_HORIZON

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def overlap(record: EpisodeRecord) -> float:
    """Fraction of visited cells covered by at least two distinct robots.

    Visits counted are poses at steps strictly before completion; for
    episodes that never complete, the horizon end substitutes. Raises
    UndefinedMetricError when no cell was visited.
    """
    cutoff = record.t_star if record.t_star is not None else record.n_steps
    visitors: dict[Cell, set[int]] = {}
    for step in record.steps:
        if step.t >= cutoff:
            break
        for rid, robot in enumerate(step.robots):
            visitors.setdefault(tuple(robot.pose), set()).add(rid)
    if not visitors:
        raise UndefinedMetricError("overlap is undefined with zero visited cells")
    multi = sum(1 for who in visitors.values() if len(who) >= 2)
    return multi / len(visitors)


def objective(t_star: int, omega: float, alpha: float, lambda_omega: float) -> float:
    """Weighted completion-time plus redundancy objective."""
    if not alpha > lambda_omega >= 0:
        raise ConfigurationError("objective requires alpha > lambda_omega >= 0")
    return alpha * t_star + lambda_omega * omega


@dataclass(frozen=True)
class EpisodeMetrics:
    success: bool
    t_star: Optional[int]
    el: Optional[int]
    overlap: Optional[float]
    j: Optional[float]
    recoveries: int
    planner_fraction: float
    collisions: int
    steps: int
    wall_time: float = 0.0


def count_recoveries(record: EpisodeRecord) -> int:
    """Recovery activations: per-robot False -> True transitions of the
    recovering flag, totalled over the team."""
    total = 0
    prev = [False] * record.n_robots
    for step in record.steps:
        for rid, robot in enumerate(step.robots):
            if robot.recovering and not prev[rid]:
                total += 1
            prev[rid] = robot.recovering
    return total


def planner_fraction(record: EpisodeRecord) -> float:
    """Fraction of robot-steps executed on the planner branch (s=1)."""
    total = record.n_steps * record.n_robots
    if total == 0:
        return 0.0
    chosen = sum(robot.switch for step in record.steps for robot in step.robots)
    return chosen / total


def episode_metrics(
    record: EpisodeRecord,
    alpha: float = 1.0,
    lambda_omega: float = 0.1,
    wall_time: float = 0.0,
) -> EpisodeMetrics:
    try:
        omega = overlap(record)
    except UndefinedMetricError:
        omega = None
    t_star = record.t_star
    j = None
    if t_star is not None:
        j = objective(t_star, omega if omega is not None else 0.0, alpha, lambda_omega)
    collisions = sum(robot.risk_events for step in record.steps for robot in step.robots)
    return EpisodeMetrics(
        success=record.success,
        t_star=t_star,
        el=t_star if record.success else None,
        overlap=omega,
        j=j,
        recoveries=count_recoveries(record),
        planner_fraction=planner_fraction(record),
        collisions=collisions,
        steps=record.n_steps,
        wall_time=wall_time,
    )


def _mean(values: Sequence[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def _sample_std(values: Sequence[float]) -> Optional[float]:
    if not values:
        return None
    if len(values) == 1:
        return 0.0
    m = sum(values) / len(values)
    return math.sqrt(sum((v - m) ** 2 for v in values) / (len(values) - 1))


@dataclass(frozen=True)
class AggregateMetrics:
    """Mean and sample standard deviation over a batch of episodes.

    Success rate is over all episodes; exploration length is averaged over
    successful episodes only; overlap, recoveries, and planner fraction are
    averaged over all episodes that produced a record.
    """

    episodes: int
    sr: float
    el_mean: Optional[float]
    el_std: Optional[float]
    overlap_mean: Optional[float]
    overlap_std: Optional[float]
    recoveries_mean: Optional[float]
    recoveries_std: Optional[float]
    planner_fraction_mean: Optional[float]
    planner_fraction_std: Optional[float]
    wall_time_total: float


def summarize(metrics: Sequence[EpisodeMetrics]) -> AggregateMetrics:
    if not metrics:
        raise ConfigurationError("summarize requires at least one episode")
    els = [float(m.el) for m in metrics if m.success and m.el is not None]
    overlaps = [m.overlap for m in metrics if m.overlap is not None]
    recoveries = [float(m.recoveries) for m in metrics]
    fractions = [m.planner_fraction for m in metrics]
    return AggregateMetrics(
        episodes=len(metrics),
        sr=sum(1 for m in metrics if m.success) / len(metrics),
        el_mean=_mean(els),
        el_std=_sample_std(els),
        overlap_mean=_mean(overlaps),
        overlap_std=_sample_std(overlaps),
        recoveries_mean=_mean(recoveries),
        recoveries_std=_sample_std(recoveries),
        planner_fraction_mean=_mean(fractions),
        planner_fraction_std=_sample_std(fractions),
        wall_time_total=sum(m.wall_time for m in metrics),
    )


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(record: EpisodeRecord, stream: IO[str]) -> None:
    """Serialize an episode as JSON lines: one header, one object per step,
    one terminal line."""
    header = {
        "kind": "header",
        "width": record.width,
        "height": record.height,
        "n_robots": record.n_robots,
        "seed": record.seed,
        "variant": record.variant,
        "horizon": record.horizon,
    }
    stream.write(_dump(header) + "\n")
    for step in record.steps:
        obj = {
            "kind": "step",
            "t": step.t,
            "newly_known": step.newly_known,
            "robots": [
                {
                    "pose": list(r.pose),
                    "action": int(r.action),
                    "switch": r.switch,
                    "p": r.p,
                    "recovering": r.recovering,
                    "risk_events": r.risk_events,
                    "contact": r.contact,
                    "planner_ok": r.planner_ok,
                }
                for r in step.robots
            ],
        }
        stream.write(_dump(obj) + "\n")
    terminal = {
        "kind": "terminal",
        "t_star": record.t_star,
        "success": record.success,
        "terminal": record.terminal,
    }
    stream.write(_dump(terminal) + "\n")


def read_jsonl(stream: IO[str]) -> EpisodeRecord:
    header = None
    steps: list[StepLog] = []
    terminal = None
    for line in stream:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        kind = obj.get("kind")
        if kind == "header":
            header = obj
        elif kind == "step":
            robots = tuple(
                RobotStepLog(
                    pose=(r["pose"][0], r["pose"][1]),
                    action=int(r["action"]),
                    switch=int(r["switch"]),
                    p=float(r["p"]),
                    recovering=bool(r["recovering"]),
                    risk_events=int(r["risk_events"]),
                    contact=bool(r["contact"]),
                    planner_ok=bool(r["planner_ok"]),
                )
                for r in obj["robots"]
            )
            steps.append(StepLog(t=int(obj["t"]), robots=robots, newly_known=int(obj["newly_known"])))
        elif kind == "terminal":
            terminal = obj
        else:
            raise ConfigurationError(f"unknown log line kind: {kind!r}")
    if header is None or terminal is None:
        raise ConfigurationError("log is missing its header or terminal line")
    return EpisodeRecord(
        width=int(header["width"]),
        height=int(header["height"]),
        n_robots=int(header["n_robots"]),
        seed=int(header["seed"]),
        variant=str(header["variant"]),
        horizon=int(header["horizon"]),
        steps=steps,
        t_star=terminal["t_star"],
        success=bool(terminal["success"]),
        terminal=str(terminal["terminal"]),
    )

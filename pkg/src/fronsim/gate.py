"""Execution-fidelity gate.

Each robot owns a tiny logistic model p = sigmoid(w . z + b) over eight
bounded features of its local situation. The scalar p (execution fidelity)
feeds two places: the allocation weights, and a dual-threshold hysteresis
switch that arbitrates between planner-guided and reactive motion. The
model recalibrates online from pseudo-labels derived from a windowed
surrogate quality score, so no hand-labelled risk data is needed.

Feature layout (all clamped to [0, 1]):

    0  crowding          teammates within the interaction radius / (N-1)
    1  stuck flag        1 if pose and coverage were frozen over a full window
    2  goal distance     BFS d(pose, goal) / (width + height), 1 if none
    3  action ratio      feasible actions / 5
    4  unknown at pose   unknown fraction of the sensing ball at the pose
    5  unknown at goal   unknown fraction of the sensing ball at the goal
    6  blockage          1 - free four-neighbours of the pose / 4
    7  planner ok        previous step's planner-feasibility flag
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, GateUpdateError
from .grid import Cell, CellState, DistanceField, GridMap, chebyshev_window

N_FEATURES = 8

F_CROWDING = 0
F_STUCK = 1
F_GOAL_DIST = 2
F_ACTION_RATIO = 3
F_UNK_POSE = 4
F_UNK_GOAL = 5
F_BLOCKAGE = 6
F_PLANNER_OK = 7


def sigmoid(x: float) -> float:
    if x >= 0:
        e = math.exp(-x)
        return 1.0 / (1.0 + e)
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass
class GateParams:
    """Learnable gate parameters plus its update hyper-parameters."""

    w: np.ndarray
    b: float
    lr: float = 0.05
    l2: float = 1e-3
    margin: float = 0.5

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.shape != (N_FEATURES,):
            raise ConfigurationError(f"gate weight vector must have shape ({N_FEATURES},)")
        if not (np.isfinite(self.w).all() and math.isfinite(self.b)):
            raise ConfigurationError("gate parameters must be finite")
        if self.margin < 0:
            raise ConfigurationError("update margin must be >= 0")

    @classmethod
    def cold(cls, lr: float = 0.05, l2: float = 1e-3, margin: float = 0.5) -> "GateParams":
        return cls(w=np.zeros(N_FEATURES), b=0.0, lr=lr, l2=l2, margin=margin)


# Keep predictions inside the open interval even when the sigmoid saturates
# in float arithmetic.
_P_FLOOR = 1e-15
_P_CEIL = 1.0 - 1e-15


def predict(params: GateParams, z: np.ndarray) -> float:
    p = sigmoid(float(params.w @ z) + params.b)
    return min(max(p, _P_FLOOR), _P_CEIL)


@dataclass(frozen=True)
class GateState:
    """Hysteresis switch state: s=1 selects the planner branch."""

    s: int = 1
    c_high: int = 0
    c_low: int = 0
    tau_high: float = 0.7
    tau_low: float = 0.3
    dwell: int = 3
    last_p: float = 0.5

    def __post_init__(self) -> None:
        if not self.tau_high > self.tau_low:
            raise ConfigurationError("tau_high must be strictly greater than tau_low")
        if self.dwell < 1:
            raise ConfigurationError("dwell must be >= 1")


def update_hysteresis(state: GateState, p: float) -> GateState:
    """One hysteresis step.

    Counters accumulate consecutive threshold satisfaction; the switch flips
    only after ``dwell`` consistent steps, and both counters reset on a flip.
    tau_high > tau_low makes the two accumulation conditions mutually
    exclusive.
    """
    c_high = (state.c_high + 1) if p >= state.tau_high else 0
    c_low = (state.c_low + 1) if p <= state.tau_low else 0
    assert not (c_high > 0 and c_low > 0)
    s = state.s
    if s == 0 and c_high >= state.dwell:
        s, c_high, c_low = 1, 0, 0
    elif s == 1 and c_low >= state.dwell:
        s, c_high, c_low = 0, 0, 0
    return replace(state, s=s, c_high=c_high, c_low=c_low, last_p=p)


@dataclass(frozen=True)
class StepRecord:
    """One history-buffer entry (pose is the pre-move pose of the step)."""

    pose: Cell
    newly_seen: int
    goal_dist: Optional[int]
    risk_events: int
    switch_flip: bool
    planner_ok: bool


class HistoryBuffer:
    """FIFO buffer of the last ``window`` step records."""

    def __init__(self, window: int):
        if window < 1:
            raise ConfigurationError("history window must be >= 1")
        self.window = window
        self._records: deque[StepRecord] = deque(maxlen=window)

    def append(self, record: StepRecord) -> None:
        self._records.append(record)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[StepRecord, ...]:
        return tuple(self._records)

    @property
    def full(self) -> bool:
        return len(self._records) == self.window

    def coverage_gain(self) -> int:
        return sum(r.newly_seen for r in self._records)

    def no_pose_change(self) -> bool:
        poses = {r.pose for r in self._records}
        return len(poses) <= 1

    def stalled(self) -> bool:
        """True when a full window shows no movement and no coverage gain."""
        return self.full and self.no_pose_change() and self.coverage_gain() == 0

    def flip_count(self) -> int:
        return sum(1 for r in self._records if r.switch_flip)


@dataclass
class SurrogateWeights:
    cov: float = 1.0
    dist: float = 0.5
    risk: float = 2.0
    stall: float = 1.0

    def __post_init__(self) -> None:
        if min(self.cov, self.dist, self.risk, self.stall) <= 0:
            raise ConfigurationError("surrogate weights must all be > 0")


def surrogate_score(history: HistoryBuffer, weights: SurrogateWeights) -> float:
    """Windowed execution-quality score.

    Q = cov * coverage gain + dist * goal-distance progress
        - risk * (collisions and violations) - stall * stall flag

    Distance progress is the recorded BFS goal distance at the window start
    minus at the window end; if either endpoint has no defined distance the
    term contributes zero. The stall flag is 1 when the whole available
    window shows no pose change and no coverage gain.
    """
    records = history.records
    if not records:
        raise ConfigurationError("surrogate score needs at least one history record")
    cov = sum(r.newly_seen for r in records)
    first, last = records[0].goal_dist, records[-1].goal_dist
    dist = float(first - last) if first is not None and last is not None else 0.0
    risk = sum(r.risk_events for r in records)
    stall = 1.0 if (history.no_pose_change() and cov == 0) else 0.0
    return weights.cov * cov + weights.dist * dist - weights.risk * risk - weights.stall * stall


def pseudo_label(q: float) -> int:
    return 1 if q >= 0 else 0


def loss(params: GateParams, z: np.ndarray, label: int) -> float:
    """Regularised binary cross entropy of one (z, label) pair."""
    logit = float(params.w @ z) + params.b
    # log(1 + exp(x)) computed stably.
    softplus = max(logit, 0.0) + math.log1p(math.exp(-abs(logit)))
    bce = softplus - label * logit
    return bce + 0.5 * params.l2 * float(params.w @ params.w)


def gradient(params: GateParams, z: np.ndarray, label: int) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`loss` with respect to (w, b)."""
    err = predict(params, z) - label
    return err * z + params.l2 * params.w, err


def online_update(
    params: GateParams, z: np.ndarray, p: float, label: int, q: float
) -> GateParams:
    """One margin-gated SGD step.

    When |Q| is below the margin the parameters are returned unchanged.
    A non-finite result rejects the update and raises GateUpdateError.
    """
    if abs(q) < params.margin:
        return params
    err = p - label
    with np.errstate(over="ignore", invalid="ignore"):
        w = params.w - params.lr * (err * z + params.l2 * params.w)
        b = params.b - params.lr * err
    if not (np.isfinite(w).all() and math.isfinite(b)):
        raise GateUpdateError(f"gate update produced non-finite parameters (q={q})")
    return replace(params, w=w, b=b)


def extract_features(
    grid: GridMap,
    pose: Cell,
    goal: Optional[Cell],
    teammate_poses: Sequence[Cell],
    pose_field: DistanceField,
    n_feasible: int,
    history: HistoryBuffer,
    planner_ok: bool,
    *,
    sense_radius: int,
    interact_radius: int,
) -> np.ndarray:
    """The eight gate features for one robot on the current step snapshot.

    ``pose_field`` is the BFS field rooted at the robot's pose; crowding and
    goal distance are read from it. The stuck flag stays 0 until a full
    history window exists.
    """
    z = np.zeros(N_FEATURES)
    n_robots = len(teammate_poses) + 1

    if n_robots > 1:
        near = 0
        for mate in teammate_poses:
            d = int(pose_field.dist[mate])
            if 0 <= d <= interact_radius:
                near += 1
        z[F_CROWDING] = near / (n_robots - 1)

    z[F_STUCK] = 1.0 if history.stalled() else 0.0

    if goal is None:
        z[F_GOAL_DIST] = 1.0
        z[F_UNK_GOAL] = 1.0
    else:
        d = int(pose_field.dist[goal])
        z[F_GOAL_DIST] = 1.0 if d < 0 else min(1.0, d / (grid.width + grid.height))
        z[F_UNK_GOAL] = _unknown_ratio(grid, goal, sense_radius)

    z[F_ACTION_RATIO] = n_feasible / 5.0
    z[F_UNK_POSE] = _unknown_ratio(grid, pose, sense_radius)

    free = 0
    r, c = pose
    for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
        if grid.is_free((nr, nc)):
            free += 1
    z[F_BLOCKAGE] = 1.0 - free / 4.0

    z[F_PLANNER_OK] = 1.0 if planner_ok else 0.0
    return z


def _unknown_ratio(grid: GridMap, cell: Cell, radius: int) -> float:
    r0, r1, c0, c1 = chebyshev_window(grid, cell, radius)
    window = grid.cells[r0:r1, c0:c1]
    return float((window == CellState.UNK).sum()) / window.size


GATE_FILE_VERSION = "fronsim-gate-v1"


def save_gate_file(path: str, w: np.ndarray, b: float) -> None:
    """Write gate parameters as plain text: a version line, the eight
    weights, then the bias."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (N_FEATURES,):
        raise ConfigurationError(f"gate weight vector must have shape ({N_FEATURES},)")
    lines = [GATE_FILE_VERSION] + [repr(float(v)) for v in w] + [repr(float(b))]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gate_file(path: str) -> tuple[np.ndarray, float]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != GATE_FILE_VERSION:
        raise ConfigurationError(f"unsupported gate file version in {path!r}")
    values = [float(v) for v in lines[1:]]
    if len(values) != N_FEATURES + 1:
        raise ConfigurationError(
            f"gate file must hold {N_FEATURES} weights plus a bias, got {len(values)} values"
        )
    return np.array(values[:N_FEATURES]), values[-1]

"""Action production: planner branch, reactive branch, switch arbitration,
recovery override, and simultaneous-move collision resolution.

The planner branch replans A* from scratch every step on the shared map
(unknown cells blocked, teammates and sensed dynamic obstacles masked out),
so it never follows a stale path. The reactive branch is a pluggable policy
over a purely local observation; the provided baseline is a potential-field
step. A recovery override breaks deadlocks with an id-offset move so that
mutually blocked robots pick different directions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidSourceError
from .gate import HistoryBuffer
from .grid import (
    ACTION_DELTAS,
    Action,
    Cell,
    CellState,
    GridMap,
    apply_action,
)
from . import kernels

_DELTA_TO_ACTION = {delta: action for action, delta in ACTION_DELTAS.items()}


@dataclass(frozen=True)
class PlanResult:
    action: Action
    ok: bool
    cost: Optional[int] = None


def plan_astar(
    grid: GridMap, start: Cell, goal: Optional[Cell], blocked: Iterable[Cell] = ()
) -> PlanResult:
    """First step of an optimal A* path from start to goal.

    Path cells must be FREE on the shared map and outside ``blocked`` (the
    start itself is exempt). An unset or unreachable goal yields
    (STAY, ok=False); infeasibility is a result, not an error.
    """
    if not grid.is_free(start):
        raise InvalidSourceError(f"plan start {start} is not a free cell")
    if goal is None:
        return PlanResult(Action.STAY, False)
    if not grid.in_bounds(goal):
        return PlanResult(Action.STAY, False)
    mask = np.zeros(grid.cells.shape, dtype=np.uint8)
    for cell in blocked:
        if grid.in_bounds(cell):
            mask[cell] = 1
    mask[start] = 0
    ok, cost, fr, fc = kernels.astar_first_step(
        grid.cells, mask, start[0], start[1], goal[0], goal[1]
    )
    if not ok:
        return PlanResult(Action.STAY, False)
    action = _DELTA_TO_ACTION[(fr - start[0], fc - start[1])]
    return PlanResult(action, True, int(cost))


@dataclass
class Observation:
    """Local observation for the reactive branch.

    ``window`` holds shared-map states in a (2R+1)^2 Chebyshev block around
    the robot, with out-of-bounds cells and current dynamic obstacles marked
    OCC. ``teammates`` is a same-shaped 0/1 mask. ``goal_offset`` is the full
    (dr, dc) offset to the assigned goal, or None.
    """

    window: np.ndarray
    teammates: np.ndarray
    goal_offset: Optional[Cell]
    feasible: tuple[Action, ...]
    radius: int

    def serialize(self) -> list[int]:
        """Fixed-order flat layout for external policies: window cells
        row-major, goal offset (dr, dc; zeros when no goal), teammate mask
        row-major."""
        out = [int(v) for v in self.window.ravel()]
        dr, dc = self.goal_offset if self.goal_offset is not None else (0, 0)
        out.extend((dr, dc))
        out.extend(int(v) for v in self.teammates.ravel())
        return out


def build_observation(
    grid: GridMap,
    pose: Cell,
    goal: Optional[Cell],
    teammate_poses: Sequence[Cell],
    obstacle_cells: Iterable[Cell],
    feasible: tuple[Action, ...],
    radius: int,
) -> Observation:
    k = 2 * radius + 1
    window = np.full((k, k), int(CellState.OCC), dtype=np.int8)
    r, c = pose
    r0, r1 = max(0, r - radius), min(grid.height, r + radius + 1)
    c0, c1 = max(0, c - radius), min(grid.width, c + radius + 1)
    window[r0 - r + radius : r1 - r + radius, c0 - c + radius : c1 - c + radius] = grid.cells[
        r0:r1, c0:c1
    ]
    for (orr, occ) in obstacle_cells:
        if abs(orr - r) <= radius and abs(occ - c) <= radius:
            window[orr - r + radius, occ - c + radius] = CellState.OCC
    teammates = np.zeros((k, k), dtype=np.uint8)
    for (tr, tc) in teammate_poses:
        if abs(tr - r) <= radius and abs(tc - c) <= radius:
            teammates[tr - r + radius, tc - c + radius] = 1
    offset = (goal[0] - r, goal[1] - c) if goal is not None else None
    return Observation(window, teammates, offset, feasible, radius)


ReactivePolicy = Callable[[Observation, np.random.Generator], Action]

# Potential-field weights: teammates repel harder than occupied cells so the
# team disperses without refusing corridors.
OCC_PENALTY = 0.25
MATE_PENALTY = 0.75
KEEP_MOVING = False
_PENALTY_RADIUS = 2
_TIE_BREAK = 1e-6


def potential_field_policy(obs: Observation, rng: np.random.Generator) -> Action:
    """Baseline reactive step: greedy goal alignment minus local proximity
    penalties, with a small seeded random tie-break. Output is always drawn
    from the feasible set."""
    k = obs.window.shape[0]
    center = obs.radius
    best_action = obs.feasible[0]
    best_score = -np.inf
    for action in obs.feasible:
        dr, dc = ACTION_DELTAS[action]
        tr, tc = center + dr, center + dc
        score = 0.0
        if obs.goal_offset is not None:
            gr, gc = obs.goal_offset
            score -= abs(gr - dr) + abs(gc - dc)
        lo_r, hi_r = max(0, tr - _PENALTY_RADIUS), min(k, tr + _PENALTY_RADIUS + 1)
        lo_c, hi_c = max(0, tc - _PENALTY_RADIUS), min(k, tc + _PENALTY_RADIUS + 1)
        for rr in range(lo_r, hi_r):
            for cc in range(lo_c, hi_c):
                cheb = max(abs(rr - tr), abs(cc - tc))
                if cheb == 0:
                    continue
                if obs.teammates[rr, cc]:
                    score -= MATE_PENALTY / (1 + cheb)
                elif obs.window[rr, cc] == CellState.OCC:
                    score -= OCC_PENALTY / (1 + cheb)
        score += _TIE_BREAK * rng.random()
        if score > best_score:
            best_score = score
            best_action = action
    return best_action


def local_nav_policy(obs: Observation, rng: np.random.Generator) -> Action:
    """Default reactive executor: window-limited lookahead.

    BFS over the traversable cells of the observation window picks the
    reachable cell that minimises remaining Manhattan distance to the goal
    plus a crowd-proximity penalty, then returns the first step toward it.
    This rounds concavities up to the window size, which a one-step
    potential descent cannot; beyond the window it is exactly as myopic.
    Ties are broken with one seeded draw. With no goal it disperses: prefer
    far, uncrowded window cells.
    """
    k = obs.window.shape[0]
    center = obs.radius
    if obs.feasible == (Action.STAY,):
        return Action.STAY

    blocked = (obs.window == CellState.OCC) | (obs.teammates > 0)
    blocked[center, center] = False
    dist = np.full((k, k), -1, dtype=np.int32)
    first = np.full((k, k, 2), center, dtype=np.int32)
    dist[center, center] = 0
    queue = [(center, center)]
    head = 0
    while head < len(queue):
        r, c = queue[head]
        head += 1
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if not (0 <= nr < k and 0 <= nc < k) or blocked[nr, nc] or dist[nr, nc] >= 0:
                continue
            dist[nr, nc] = dist[r, c] + 1
            first[nr, nc] = (nr, nc) if (r, c) == (center, center) else first[r, c]
            queue.append((nr, nc))

    def crowd_pen(r: int, c: int) -> float:
        pen = 0.0
        lo_r, hi_r = max(0, r - _PENALTY_RADIUS), min(k, r + _PENALTY_RADIUS + 1)
        lo_c, hi_c = max(0, c - _PENALTY_RADIUS), min(k, c + _PENALTY_RADIUS + 1)
        for rr in range(lo_r, hi_r):
            for cc in range(lo_c, hi_c):
                cheb = max(abs(rr - r), abs(cc - c))
                if cheb == 0:
                    continue
                if obs.teammates[rr, cc]:
                    pen += MATE_PENALTY / (1 + cheb)
                elif obs.window[rr, cc] == CellState.OCC:
                    pen += OCC_PENALTY / (1 + cheb)
        return pen

    best_key = None
    ties: list[tuple[int, int]] = []
    for r in range(k):
        for c in range(k):
            if dist[r, c] < 0:
                continue
            if obs.goal_offset is not None:
                gr, gc = obs.goal_offset
                remaining = abs(gr - (r - center)) + abs(gc - (c - center))
                key = (remaining + crowd_pen(r, c), dist[r, c])
            else:
                key = (crowd_pen(r, c) - 0.5 * dist[r, c], dist[r, c])
            if best_key is None or key < best_key:
                best_key = key
                ties = [(r, c)]
            elif key == best_key:
                ties.append((r, c))
    target = ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]
    if target != (center, center):
        fr, fc = first[target]
        action = _DELTA_TO_ACTION[(int(fr) - center, int(fc) - center)]
        if action in obs.feasible:
            return action
    if not KEEP_MOVING:
        return Action.STAY
    # No window cell improves on standing still; keep moving anyway (toward
    # the least crowded neighbour) rather than freeze in a local minimum.
    moves = [a for a in obs.feasible if a != Action.STAY]
    if not moves:
        return Action.STAY
    best = None
    best_pen = None
    for action in moves:
        dr, dc = ACTION_DELTAS[action]
        pen = crowd_pen(center + dr, center + dc) + _TIE_BREAK * rng.random()
        if best_pen is None or pen < best_pen:
            best_pen = pen
            best = action
    return best


def arbitrate(switch: int, plan: PlanResult, reactive: Action) -> Action:
    """Switch s=1 selects the planner action, s=0 the reactive action."""
    return plan.action if switch == 1 else reactive


REASON_INFEASIBLE = "infeasible"
REASON_STALLED = "stalled"
REASON_OSCILLATING = "oscillating"


@dataclass(frozen=True)
class RecoveryState:
    active: bool = False
    remaining: int = 0
    reason: Optional[str] = None


def recovery_override(
    proposed: Action,
    state: RecoveryState,
    history: HistoryBuffer,
    feasible: tuple[Action, ...],
    robot_id: int,
    t: int,
    *,
    recovery_len: int,
    osc_threshold: int,
    plan_fail_streak: int,
) -> tuple[Action, RecoveryState, bool]:
    """Apply the recovery override to a proposed action.

    Triggers (evaluated only while inactive, and only once a full history
    window exists for the window-based ones):

    * ``plan_fail_streak`` of planner-intent infeasible steps reaching the
      window length,
    * no pose change and no coverage gain over a full window,
    * at least ``osc_threshold`` switch flips inside the window.

    While active, the action is a deterministic symmetry-breaking move:
    feasible non-STAY actions indexed by (robot_id + t) mod count, so
    mutually blocked robots pick different directions. Returns
    (action, new_state, recovering_this_step).
    """
    if not state.active:
        reason = None
        if plan_fail_streak >= history.window:
            reason = REASON_INFEASIBLE
        elif history.stalled():
            reason = REASON_STALLED
        elif history.full and history.flip_count() >= osc_threshold:
            reason = REASON_OSCILLATING
        if reason is None:
            return proposed, state, False
        state = RecoveryState(active=True, remaining=recovery_len, reason=reason)

    choices = [a for a in feasible if a != Action.STAY]
    action = choices[(robot_id + t) % len(choices)] if choices else Action.STAY
    remaining = state.remaining - 1
    new_state = (
        RecoveryState(active=True, remaining=remaining, reason=state.reason)
        if remaining > 0
        else RecoveryState()
    )
    return action, new_state, True


def resolve_collisions(
    intended: Sequence[Action],
    poses: Sequence[Cell],
    obstacle_cells: frozenset[Cell] | set[Cell],
) -> tuple[list[Action], list[int], list[bool]]:
    """Resolve simultaneous robot moves.

    Vertex conflicts (several robots into one cell) keep the lowest-id mover
    and convert the rest to STAY; swap conflicts convert both sides to STAY;
    a move into a dynamic-obstacle cell is bounced to STAY and flagged as an
    obstacle contact. Demotions cascade until the post-state has at most one
    robot per cell. Returns (executed actions, per-robot risk-event counts,
    per-robot obstacle-contact flags).
    """
    n = len(intended)
    executed = list(intended)
    risk = [0] * n
    contact = [False] * n

    def target(i: int) -> Cell:
        return apply_action(poses[i], executed[i])

    for i in range(n):
        if executed[i] != Action.STAY and target(i) in obstacle_cells:
            executed[i] = Action.STAY
            risk[i] += 1
            contact[i] = True

    for i in range(n):
        for j in range(i + 1, n):
            if (
                executed[i] != Action.STAY
                and executed[j] != Action.STAY
                and target(i) == poses[j]
                and target(j) == poses[i]
            ):
                executed[i] = Action.STAY
                executed[j] = Action.STAY
                risk[i] += 1
                risk[j] += 1

    while True:
        owners: dict[Cell, list[int]] = {}
        for i in range(n):
            owners.setdefault(target(i), []).append(i)
        demoted = False
        for cell, ids in owners.items():
            if len(ids) < 2:
                continue
            stayers = [i for i in ids if executed[i] == Action.STAY]
            keep = stayers[0] if stayers else ids[0]
            for i in ids:
                if i != keep and executed[i] != Action.STAY:
                    executed[i] = Action.STAY
                    risk[i] += 1
                    demoted = True
        if not demoted:
            break

    return executed, risk, contact

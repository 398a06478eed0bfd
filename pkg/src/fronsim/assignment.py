"""Fidelity-coupled frontier allocation.

Pipeline per reassignment round: frontiers are Voronoi-filtered by BFS
distance to a per-robot candidate set, each candidate gets a raw utility u
(unknown cells near it), travel distance d, and inter-robot repulsion r,
the three are min-max normalised over the candidate list, and the robot
takes the argmax of  phi = u_hat - lam(p) * d_hat - rho(p) * r_hat  where
the weights grow as the robot's execution fidelity p drops:

    lam(p) = lam0 + lam1 * (1 - p)      rho(p) = rho0 + rho1 * (1 - p)

Repulsion for assigning robot i to frontier f (teammates j != i, gated to an
interaction radius, distances are BFS path distances on the shared map):

    r = 1/(N-1) * sum_j 1{d(f,x_j) <= R_u} exp(-d(f,x_j)/sigma_x)
      + beta/(N-1) * sum_j 1{d(f,g_j) <= R_u} exp(-d(f,g_j)/sigma_g)

An unset teammate goal or an unreachable distance contributes zero.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .grid import Cell, CellState, DistanceField, GridMap, chebyshev_window


@dataclass
class AssignmentParams:
    lam0: float = 0.3
    lam1: float = 1.2
    rho0: float = 0.2
    rho1: float = 3.0
    beta: float = 0.5
    sigma_x: float = 2.0
    sigma_g: float = 2.0
    interact_radius: int = 3
    reassign_every: int = 8

    def __post_init__(self) -> None:
        for name in ("lam0", "lam1", "rho0", "rho1", "beta"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if self.sigma_x <= 0 or self.sigma_g <= 0:
            raise ConfigurationError("sigma_x and sigma_g must be > 0")
        if self.reassign_every < 1:
            raise ConfigurationError("reassign_every must be >= 1")


@dataclass
class FrontierCandidate:
    cell: Cell
    u: int
    d: int
    r: float
    u_hat: float = 0.0
    d_hat: float = 0.0
    r_hat: float = 0.0
    phi: float = 0.0


def coupling_weights(p: float, params: AssignmentParams) -> tuple[float, float]:
    """Distance and repulsion weights for fidelity p (both grow as p drops)."""
    one_minus = 1.0 - p
    return params.lam0 + params.lam1 * one_minus, params.rho0 + params.rho1 * one_minus


def voronoi_filter(
    frontiers: Sequence[Cell], fields: Sequence[DistanceField]
) -> list[list[Cell]]:
    """Partition frontiers among robots by BFS distance.

    Frontier f goes to robot i iff d_i(f) is finite and d_i(f) <= d_j(f) for
    every robot j, ties broken by the lower robot index. Frontiers no robot
    can reach belong to no one. Input order (row-major) is preserved within
    each subset.
    """
    subsets: list[list[Cell]] = [[] for _ in fields]
    for f in frontiers:
        best_i = -1
        best_d = -1
        for i, fld in enumerate(fields):
            d = int(fld.dist[f])
            if d < 0:
                continue
            if best_i < 0 or d < best_d:
                best_i, best_d = i, d
        if best_i >= 0:
            subsets[best_i].append(f)
    return subsets


def utility(grid: GridMap, cell: Cell, sense_radius: int) -> int:
    """Unknown-cell count in the Chebyshev ball around ``cell``."""
    r0, r1, c0, c1 = chebyshev_window(grid, cell, sense_radius)
    return int((grid.cells[r0:r1, c0:c1] == CellState.UNK).sum())


def utilities(grid: GridMap, cells: Sequence[Cell], sense_radius: int) -> np.ndarray:
    """Batch ``utility`` via a summed-area table (same values, O(grid + n))."""
    unk = (grid.cells == CellState.UNK).astype(np.int32)
    sat = np.zeros((grid.height + 1, grid.width + 1), dtype=np.int32)
    sat[1:, 1:] = unk.cumsum(0).cumsum(1)
    out = np.empty(len(cells), dtype=np.int32)
    for k, cell in enumerate(cells):
        r0, r1, c0, c1 = chebyshev_window(grid, cell, sense_radius)
        out[k] = sat[r1, c1] - sat[r0, c1] - sat[r1, c0] + sat[r0, c0]
    return out


def _repulsion_from_distances(
    pose_dists: Sequence[Optional[int]],
    goal_dists: Sequence[Optional[int]],
    params: AssignmentParams,
    n_robots: int,
) -> float:
    if n_robots <= 1:
        return 0.0
    scale = 1.0 / (n_robots - 1)
    r_u = params.interact_radius
    pose_term = sum(
        math.exp(-d / params.sigma_x) for d in pose_dists if d is not None and d <= r_u
    )
    goal_term = sum(
        math.exp(-d / params.sigma_g) for d in goal_dists if d is not None and d <= r_u
    )
    return scale * pose_term + params.beta * scale * goal_term


def repulsion(
    cell: Cell,
    robot_id: int,
    poses: Sequence[Cell],
    goals: Sequence[Optional[Cell]],
    field_from_cell: DistanceField,
    params: AssignmentParams,
) -> float:
    """Repulsion penalty for assigning ``robot_id`` to frontier ``cell``.

    ``field_from_cell`` is the BFS field rooted at the frontier; teammates
    whose pose or goal is unreachable from it (or whose goal is unset)
    contribute zero. A single-robot team always scores 0.
    """
    pose_dists = [
        field_from_cell.distance(p) for j, p in enumerate(poses) if j != robot_id
    ]
    goal_dists = [
        field_from_cell.distance(g)
        for j, g in enumerate(goals)
        if j != robot_id and g is not None
    ]
    return _repulsion_from_distances(pose_dists, goal_dists, params, len(poses))


def repulsion_via_fields(
    cell: Cell,
    robot_id: int,
    poses: Sequence[Cell],
    goals: Sequence[Optional[Cell]],
    pose_fields: Sequence[DistanceField],
    goal_fields: dict[Cell, Optional[DistanceField]],
    params: AssignmentParams,
) -> float:
    """Same value as :func:`repulsion`, but using fields rooted at teammate
    poses and goals (BFS distance on the undirected grid is symmetric, so
    d(f, x_j) can be read from the field rooted at x_j). This is the path the
    allocation rounds use: the pose fields already exist for Voronoi
    filtering, avoiding one BFS per candidate frontier.
    """
    pose_dists = [
        pose_fields[j].distance(cell) for j in range(len(poses)) if j != robot_id
    ]
    goal_dists = []
    for j, g in enumerate(goals):
        if j == robot_id or g is None:
            continue
        fld = goal_fields.get(g)
        goal_dists.append(fld.distance(cell) if fld is not None else None)
    return _repulsion_from_distances(pose_dists, goal_dists, params, len(poses))


def _minmax(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros(len(values))
    return (values - lo) / (hi - lo)


def coupled_scores(
    cands: list[FrontierCandidate], p: float, params: AssignmentParams
) -> list[FrontierCandidate]:
    """Fill normalised terms and the coupled score phi on each candidate.

    Raw u, d, r are min-max normalised over the candidate list; a degenerate
    list (min == max) maps everything to 0 so single-candidate rounds stay
    well defined.
    """
    if not cands:
        raise ConfigurationError("coupled_scores requires a non-empty candidate list")
    lam, rho = coupling_weights(p, params)
    u_hat = _minmax(np.array([c.u for c in cands], dtype=np.float64))
    d_hat = _minmax(np.array([c.d for c in cands], dtype=np.float64))
    r_hat = _minmax(np.array([c.r for c in cands], dtype=np.float64))
    for k, cand in enumerate(cands):
        cand.u_hat = float(u_hat[k])
        cand.d_hat = float(d_hat[k])
        cand.r_hat = float(r_hat[k])
        cand.phi = cand.u_hat - lam * cand.d_hat - rho * cand.r_hat
    return cands


def select_best(cands: Sequence[FrontierCandidate]) -> FrontierCandidate:
    """Argmax of phi with deterministic tie-breaking: smaller d, then
    row-major cell order."""
    return min(cands, key=lambda c: (-c.phi, c.d, c.cell))


def should_reassign(t: int, reassign_every: int, goal: Optional[Cell], pose: Cell) -> bool:
    """Reassignment fires periodically, when the goal is unset, or when the
    robot stands on its goal."""
    return t % reassign_every == 0 or goal is None or pose == goal


def nearest_reachable(frontiers: Sequence[Cell], field: DistanceField) -> Optional[Cell]:
    """Closest reachable frontier by BFS distance (ties row-major), or None."""
    best: Optional[tuple[int, Cell]] = None
    for f in frontiers:
        d = int(field.dist[f])
        if d < 0:
            continue
        if best is None or (d, f) < best:
            best = (d, f)
    return best[1] if best else None


def probe_goal(
    grid: GridMap,
    pose: Cell,
    frontiers: Sequence[Cell],
    occ_evidence: Optional[np.ndarray] = None,
    avoid: frozenset[Cell] | set[Cell] = frozenset(),
) -> Optional[Cell]:
    """Approach cell for a walled-off frontier region.

    Used when no frontier has a finite BFS distance: dynamic obstacles fused
    into the shared map can leave stale occupied cells that seal the
    remaining unknown region, and idling there would deadlock the episode.

    A weighted search from the pose prices free cells at 1 and non-free
    cells at a heavy penalty scaled by ``occ_evidence`` (how often each cell
    has been re-sensed as occupied), then takes the cheapest path to any
    frontier. The returned goal is the last free cell before that path first
    crosses a non-free cell, i.e. the best spot from which sensing can
    either clear a stale seal or pile up evidence that it is solid, steering
    later probes to other routes. Cells in ``avoid`` (teammates' probe goals
    from the same round) are priced like walls so concurrent probes queue up
    or spread over different chokes. Falls back to None only without
    frontiers.
    """
    if not frontiers:
        return None
    h, w = grid.height, grid.width
    cells = grid.cells
    heavy = h * w
    if occ_evidence is None:
        occ_evidence = np.zeros((h, w), dtype=np.int32)

    enter = np.where(
        cells == CellState.FREE,
        np.int64(1),
        np.where(
            cells == CellState.UNK,
            np.int64(heavy),
            heavy * (1 + occ_evidence.astype(np.int64)),
        ),
    )
    for cell in avoid:
        enter[cell] += heavy
    enter_flat = enter.ravel()

    targets = {r * w + c for r, c in frontiers}
    dist = [-1] * (h * w)
    parent = [-1] * (h * w)
    costs = enter_flat.tolist()
    start = pose[0] * w + pose[1]
    dist[start] = 0
    heap = [(0, start)]
    push = heapq.heappush
    pop = heapq.heappop
    goal_flat = -1
    while heap:
        d, flat = pop(heap)
        if d > dist[flat]:
            continue
        if flat in targets:
            goal_flat = flat
            break
        r, c = divmod(flat, w)
        for nxt in (
            flat - w if r > 0 else -1,
            flat + w if r + 1 < h else -1,
            flat - 1 if c > 0 else -1,
            flat + 1 if c + 1 < w else -1,
        ):
            if nxt < 0:
                continue
            nd = d + costs[nxt]
            if dist[nxt] < 0 or nd < dist[nxt]:
                dist[nxt] = nd
                parent[nxt] = flat
                push(heap, (nd, nxt))
    if goal_flat < 0:
        return None

    # Walk the path pose -> frontier and stop before the first cell that is
    # not plain free space (walls, unknowns, or a claimed probe cell).
    path = []
    flat = goal_flat
    while flat >= 0:
        path.append(flat)
        flat = parent[flat]
    path.reverse()
    probe = pose
    for flat in path[1:]:
        cell = (flat // w, flat % w)
        if cells[cell] != CellState.FREE or cell in avoid:
            break
        probe = cell
    return probe


def assign_target(
    robot_id: int,
    grid: GridMap,
    frontiers: Sequence[Cell],
    poses: Sequence[Cell],
    goals: Sequence[Optional[Cell]],
    pose_fields: Sequence[DistanceField],
    goal_fields: dict[Cell, Optional[DistanceField]],
    p: float,
    params: AssignmentParams,
    sense_radius: int,
    subsets: Optional[list[list[Cell]]] = None,
    frontier_utils: Optional[dict[Cell, int]] = None,
) -> Optional[Cell]:
    """Pick the next goal for one robot.

    Frontiers are Voronoi-filtered; a robot whose subset is empty scores the
    reachable global set with the same coupled objective (so repulsion still
    steers it away from teammates' targets). Returns None when no frontier
    is reachable at all or the frontier set is empty (the episode layer may
    then fall back to :func:`probe_goal`). ``subsets`` and
    ``frontier_utils`` may be passed in when several robots reassign in the
    same round, to share the per-round work.
    """
    if not frontiers:
        return None
    if subsets is None:
        subsets = voronoi_filter(frontiers, pose_fields)
    field = pose_fields[robot_id]
    own = subsets[robot_id]
    if not own:
        own = [f for f in frontiers if field.dist[f] >= 0]
        if not own:
            return None
    if frontier_utils is None:
        utils = utilities(grid, own, sense_radius)
        frontier_utils = {f: int(utils[k]) for k, f in enumerate(own)}
    cands = [
        FrontierCandidate(
            cell=f,
            u=frontier_utils[f],
            d=int(field.dist[f]),
            r=repulsion_via_fields(f, robot_id, poses, goals, pose_fields, goal_fields, params),
        )
        for f in own
    ]
    coupled_scores(cands, p, params)
    return select_best(cands).cell

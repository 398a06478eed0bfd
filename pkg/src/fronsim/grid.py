"""Grid world substrate: occupancy maps, sensing fusion, frontiers, BFS
distance fields, dynamic obstacles, and move feasibility.

Conventions used throughout the package:

* Cells are ``(row, col)`` tuples; grids are numpy ``int8`` arrays indexed
  ``[row, col]``.
* The sensing ball ``B(cell, radius)`` is the Chebyshev (square-window)
  neighbourhood, clipped at the map border.
* Adjacency for motion, frontiers, and path search is four-connected.
* Unknown cells are non-traversable for BFS and A*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, InvalidSourceError

Cell = tuple[int, int]

UNREACHABLE = kernels.UNREACHABLE


class CellState(IntEnum):
    FREE = 0
    OCC = 1
    UNK = 2


assert CellState.FREE == kernels.FREE

_ASCII = {CellState.FREE: ".", CellState.OCC: "#", CellState.UNK: "?"}
_ASCII_INV = {v: k for k, v in _ASCII.items()}


class Action(IntEnum):
    """Discrete robot actions; UP decreases the row, RIGHT increases the col."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


ACTION_DELTAS: dict[Action, Cell] = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
    Action.STAY: (0, 0),
}

MOVE_ACTIONS = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)
ALL_ACTIONS = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT, Action.STAY)


def apply_action(pose: Cell, action: Action) -> Cell:
    dr, dc = ACTION_DELTAS[action]
    return (pose[0] + dr, pose[1] + dc)


class GridMap:
    """Occupancy grid over cells in {FREE, OCC, UNK}."""

    __slots__ = ("cells",)

    def __init__(self, cells: np.ndarray):
        cells = np.asarray(cells, dtype=np.int8)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ConfigurationError(f"grid must be 2-D and non-empty, got shape {cells.shape}")
        if not np.isin(cells, (0, 1, 2)).all():
            raise ConfigurationError("grid contains values outside {FREE, OCC, UNK}")
        self.cells = cells

    @classmethod
    def full(cls, height: int, width: int, state: CellState = CellState.UNK) -> "GridMap":
        return cls(np.full((height, width), int(state), dtype=np.int8))

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def state(self, cell: Cell) -> CellState:
        return CellState(int(self.cells[cell]))

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.cells[cell] == CellState.FREE

    def copy(self) -> "GridMap":
        return GridMap(self.cells.copy())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GridMap) and np.array_equal(self.cells, other.cells)

    def __repr__(self) -> str:
        return f"GridMap({self.height}x{self.width})"

    def to_ascii(self) -> str:
        rows = ("".join(_ASCII[CellState(int(v))] for v in row) for row in self.cells)
        return "\n".join(rows) + "\n"

    @classmethod
    def from_ascii(cls, text: str) -> "GridMap":
        lines = [ln for ln in text.splitlines() if ln]
        if not lines:
            raise ConfigurationError("empty ascii map")
        widths = {len(ln) for ln in lines}
        if len(widths) != 1:
            raise ConfigurationError("ragged ascii map rows")
        try:
            cells = np.array(
                [[int(_ASCII_INV[ch]) for ch in ln] for ln in lines], dtype=np.int8
            )
        except KeyError as exc:
            raise ConfigurationError(f"unknown map character: {exc.args[0]!r}") from None
        return cls(cells)


def chebyshev_window(grid: GridMap, center: Cell, radius: int) -> tuple[int, int, int, int]:
    """Inclusive-exclusive (r0, r1, c0, c1) bounds of B(center, radius) clipped to the map."""
    r, c = center
    return (
        max(0, r - radius),
        min(grid.height, r + radius + 1),
        max(0, c - radius),
        min(grid.width, c + radius + 1),
    )


@dataclass
class DistanceField:
    """BFS distances from a source cell; -1 marks unreachable cells."""

    source: Cell
    dist: np.ndarray

    def distance(self, cell: Cell) -> Optional[int]:
        d = int(self.dist[cell])
        return None if d == UNREACHABLE else d

    def reachable(self, cell: Cell) -> bool:
        return self.dist[cell] != UNREACHABLE


def bfs_distance_field(grid: GridMap, source: Cell) -> DistanceField:
    """Unit-cost shortest paths through FREE cells only.

    Raises InvalidSourceError when the source is not a free cell.
    """
    if not grid.is_free(source):
        raise InvalidSourceError(f"BFS source {source} is not a free cell")
    return DistanceField(source, kernels.bfs_fill(grid.cells, source[0], source[1]))


def sense_and_fuse(
    shared: GridMap,
    truth: GridMap,
    obstacle_cells: Iterable[Cell],
    pose: Cell,
    sense_radius: int,
) -> int:
    """Fuse one robot's sensing sweep into the shared map, in place.

    Every cell in the Chebyshev ball B(pose, sense_radius) is overwritten
    with the ground-truth state, then dynamic-obstacle cells inside the ball
    are marked OCC. Returns the number of cells that changed from UNK to a
    known state (the robot's newly-observed count).
    """
    if shared.cells.shape != truth.cells.shape:
        raise ConfigurationError(
            f"shared map {shared.cells.shape} does not match truth {truth.cells.shape}"
        )
    if sense_radius < 1:
        raise ConfigurationError("sense_radius must be >= 1")
    r0, r1, c0, c1 = chebyshev_window(shared, pose, sense_radius)
    window = shared.cells[r0:r1, c0:c1]
    newly = int((window == CellState.UNK).sum())
    window[...] = truth.cells[r0:r1, c0:c1]
    for (orr, occ) in obstacle_cells:
        if r0 <= orr < r1 and c0 <= occ < c1:
            shared.cells[orr, occ] = CellState.OCC
    return newly


def frontier_mask(grid: GridMap) -> np.ndarray:
    """Boolean mask of frontier cells: FREE cells with an UNK four-neighbour."""
    cells = grid.cells
    free = cells == CellState.FREE
    unk = cells == CellState.UNK
    near_unk = np.zeros_like(free)
    near_unk[:-1, :] |= unk[1:, :]
    near_unk[1:, :] |= unk[:-1, :]
    near_unk[:, :-1] |= unk[:, 1:]
    near_unk[:, 1:] |= unk[:, :-1]
    return free & near_unk


def extract_frontiers(grid: GridMap) -> list[Cell]:
    """Frontier cells in row-major order."""
    return [(int(r), int(c)) for r, c in np.argwhere(frontier_mask(grid))]


@dataclass
class DynamicObstacleSet:
    """Moving obstacles with a fixed speed ratio relative to the robots.

    Each obstacle keeps a persistent heading and its own rng stream, so
    stepping is deterministic regardless of how the set is traversed. The
    speed ratio nu in (0, 1) is realised on the discrete clock by moving only
    on steps where the ceiling accumulator ceil((t+1)*nu) - ceil(t*nu)
    advances; at nu = 0.5 that means even-numbered steps.
    """

    positions: list[Cell]
    nu: float
    headings: list[int] = field(default_factory=list)
    rngs: list[np.random.Generator] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not (0.0 < self.nu < 1.0):
            raise ConfigurationError(f"speed ratio nu must be in (0,1), got {self.nu}")
        if not self.headings:
            self.headings = [int(rng.integers(4)) for rng in self.rngs]
        if len(self.positions) != len(self.headings) or len(self.positions) != len(self.rngs):
            raise ConfigurationError("obstacle positions, headings, and rng streams must align")

    def occupied(self) -> frozenset[Cell]:
        return frozenset(self.positions)

    def due(self, t: int) -> bool:
        return math.ceil((t + 1) * self.nu) - math.ceil(t * self.nu) >= 1


_HEADING_KEEP_PROB = 0.8


def step_dynamic_obstacles(
    obstacles: DynamicObstacleSet,
    truth: GridMap,
    robot_poses: Sequence[Cell],
    t: int,
) -> DynamicObstacleSet:
    """Advance the obstacle set one simulation step.

    Obstacles attempt a four-neighbour move only on steps where they are due
    per the speed ratio, keeping their heading with probability 0.8 and
    resampling it uniformly otherwise. Moves into static-OCC cells, map
    borders, other obstacles, or robot cells are cancelled (the obstacle
    stays). Obstacles are processed in index order. The per-obstacle rng
    streams are consumed in place.
    """
    if not obstacles.due(t):
        return obstacles
    positions = list(obstacles.positions)
    headings = list(obstacles.headings)
    occupied = set(positions)
    robots = set(robot_poses)
    for i, (r, c) in enumerate(positions):
        rng = obstacles.rngs[i]
        if rng.random() >= _HEADING_KEEP_PROB:
            headings[i] = int(rng.integers(4))
        dr, dc = ACTION_DELTAS[MOVE_ACTIONS[headings[i]]]
        target = (r + dr, c + dc)
        if (
            truth.is_free(target)
            and target not in occupied
            and target not in robots
        ):
            occupied.discard((r, c))
            occupied.add(target)
            positions[i] = target
    return DynamicObstacleSet(
        positions=positions, nu=obstacles.nu, headings=headings, rngs=obstacles.rngs
    )


def feasible_actions(
    grid: GridMap,
    pose: Cell,
    other_poses: Sequence[Cell],
    obstacle_cells: frozenset[Cell] | set[Cell],
) -> tuple[Action, ...]:
    """Collision-free actions for a robot at ``pose`` on the shared map.

    A move is feasible iff its target is in bounds, FREE in the shared map,
    not a dynamic-obstacle cell, and not currently occupied by another robot.
    STAY is always feasible. Order is fixed (UP, DOWN, LEFT, RIGHT, STAY).
    """
    others = set(other_poses)
    out = []
    for action in MOVE_ACTIONS:
        target = apply_action(pose, action)
        if grid.is_free(target) and target not in obstacle_cells and target not in others:
            out.append(action)
    out.append(Action.STAY)
    return tuple(out)

"""Procedural scenario generation.

Static maps are per-cell Bernoulli obstacle draws followed by a connectivity
repair: only the largest 4-connected free component is kept, remaining free
pockets become occupied. Robot starts and dynamic obstacles are sampled
without replacement from that component, so every start is mutually
reachable. Everything derives deterministically from the scenario seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .errors import ConfigurationError
from .grid import Cell, CellState, DynamicObstacleSet, GridMap
from . import kernels

_MAX_ATTEMPTS = 32


@dataclass
class Scenario:
    truth: GridMap
    starts: list[Cell]
    obstacles: DynamicObstacleSet
    robot_rngs: list[np.random.Generator]
    attempt: int


def sample_static_grid(rng: np.random.Generator, height: int, width: int, p_occ: float) -> np.ndarray:
    """Pre-repair static map: independent per-cell occupancy draws."""
    occ = rng.random((height, width)) < p_occ
    return np.where(occ, np.int8(CellState.OCC), np.int8(CellState.FREE))


def largest_free_component(cells: np.ndarray) -> np.ndarray:
    """Boolean mask of the largest 4-connected FREE component."""
    free = cells == CellState.FREE
    traversable = np.where(free, np.int8(0), np.int8(1))
    best_mask = np.zeros_like(free)
    best_size = 0
    seen = np.zeros_like(free)
    height, width = cells.shape
    for r in range(height):
        for c in range(width):
            if not free[r, c] or seen[r, c]:
                continue
            dist = kernels.bfs_fill(traversable, r, c)
            mask = dist >= 0
            seen |= mask
            size = int(mask.sum())
            if size > best_size:
                best_size = size
                best_mask = mask
    return best_mask


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    """Build the ground-truth world for one episode.

    Retries with a derived seed (bounded) when the largest free component
    cannot host the robots and obstacles.
    """
    needed = cfg.n_robots + cfg.n_dynamic
    if needed > cfg.width * cfg.height:
        raise ConfigurationError("map too small for the requested robots and obstacles")
    last_size = 0
    for attempt in range(_MAX_ATTEMPTS):
        root = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(attempt,))
        map_seq, placement_seq, obstacle_seq, robot_seq = root.spawn(4)
        map_rng = np.random.Generator(np.random.PCG64(map_seq))
        cells = sample_static_grid(map_rng, cfg.height, cfg.width, cfg.p_occ)
        component = largest_free_component(cells)
        last_size = int(component.sum())
        if last_size < needed:
            continue
        cells = np.where(component, np.int8(CellState.FREE), np.int8(CellState.OCC))
        truth = GridMap(cells)

        placement_rng = np.random.Generator(np.random.PCG64(placement_seq))
        free_cells = np.argwhere(component)
        order = placement_rng.permutation(len(free_cells))
        chosen = free_cells[order[:needed]]
        starts = [(int(r), int(c)) for r, c in chosen[: cfg.n_robots]]
        obstacle_cells = [(int(r), int(c)) for r, c in chosen[cfg.n_robots :]]

        obstacle_rngs = [
            np.random.Generator(np.random.PCG64(seq)) for seq in obstacle_seq.spawn(max(1, cfg.n_dynamic))
        ][: cfg.n_dynamic]
        obstacles = DynamicObstacleSet(positions=obstacle_cells, nu=cfg.nu, rngs=obstacle_rngs)
        robot_rngs = [
            np.random.Generator(np.random.PCG64(seq)) for seq in robot_seq.spawn(cfg.n_robots)
        ]
        return Scenario(
            truth=truth,
            starts=starts,
            obstacles=obstacles,
            robot_rngs=robot_rngs,
            attempt=attempt,
        )
    raise ConfigurationError(
        f"could not generate a scenario with a free component of {needed} cells "
        f"(best attempt had {last_size}) after {_MAX_ATTEMPTS} tries"
    )

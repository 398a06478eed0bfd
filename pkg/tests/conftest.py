import numpy as np
import pytest

from fronsim.grid import CellState, GridMap


def random_map(rng: np.random.Generator, height: int, width: int, p_occ=0.25, p_unk=0.2) -> GridMap:
    """Random partial map with free, occupied, and unknown cells."""
    draw = rng.random((height, width))
    cells = np.full((height, width), int(CellState.FREE), dtype=np.int8)
    cells[draw < p_occ] = int(CellState.OCC)
    cells[draw > 1.0 - p_unk] = int(CellState.UNK)
    return GridMap(cells)


def random_free_cell(rng: np.random.Generator, grid: GridMap):
    free = np.argwhere(grid.cells == CellState.FREE)
    if len(free) == 0:
        return None
    r, c = free[rng.integers(len(free))]
    return (int(r), int(c))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)

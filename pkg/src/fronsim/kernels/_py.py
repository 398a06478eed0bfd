"""Pure-Python grid-search kernels.

Fallback twin of ``fronsim.kernels._native``. Both implementations must stay
behaviourally identical: same neighbour expansion order (up, down, left,
right), same (f, insertion-counter) heap tie-breaking in A*, same return
conventions. All arithmetic is integer, so results match the compiled kernel
bit for bit (see tests/test_kernel_parity.py).

Cell value 0 is traversable free space; anything else blocks.
"""

from __future__ import annotations

import heapq
from collections import deque

import numpy as np

FREE = 0
UNREACHABLE = -1

# Neighbour order: up, down, left, right.
_NBRS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def bfs_fill(cells: np.ndarray, sr: int, sc: int) -> np.ndarray:
    """Unit-cost BFS distances from (sr, sc) through free cells.

    Returns an int32 array of the grid shape; unreachable cells (and all
    cells when the source itself is not free) hold -1.
    """
    h, w = cells.shape
    dist = np.full((h, w), UNREACHABLE, dtype=np.int32)
    if cells[sr, sc] != FREE:
        return dist
    dist[sr, sc] = 0
    queue = deque([(sr, sc)])
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in _NBRS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and cells[nr, nc] == FREE and dist[nr, nc] == UNREACHABLE:
                dist[nr, nc] = d
                queue.append((nr, nc))
    return dist


def astar_first_step(
    cells: np.ndarray,
    blocked: np.ndarray,
    sr: int,
    sc: int,
    gr: int,
    gc: int,
) -> tuple[bool, int, int, int]:
    """A* (Manhattan heuristic) over free, non-blocked cells.

    Returns (ok, cost, first_r, first_c) where (first_r, first_c) is the
    first cell of an optimal path from the start. On failure cost is -1 and
    the first cell is the start itself. The start cell is exempt from the
    blocked mask.
    """
    h, w = cells.shape
    if sr == gr and sc == gc:
        return True, 0, sr, sc
    if cells[gr, gc] != FREE or blocked[gr, gc]:
        return False, -1, sr, sc

    g = np.full((h, w), -1, dtype=np.int32)
    parent = np.full((h, w), -1, dtype=np.int32)
    closed = np.zeros((h, w), dtype=bool)

    g[sr, sc] = 0
    counter = 0
    heap = [(abs(sr - gr) + abs(sc - gc), counter, sr * w + sc)]
    counter += 1
    found = False
    while heap:
        _, _, cell = heapq.heappop(heap)
        r, c = divmod(cell, w)
        if closed[r, c]:
            continue
        closed[r, c] = True
        if r == gr and c == gc:
            found = True
            break
        ng = g[r, c] + 1
        for dr, dc in _NBRS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            if cells[nr, nc] != FREE or blocked[nr, nc] or closed[nr, nc]:
                continue
            if g[nr, nc] == -1 or ng < g[nr, nc]:
                g[nr, nc] = ng
                parent[nr, nc] = cell
                heapq.heappush(heap, (ng + abs(nr - gr) + abs(nc - gc), counter, nr * w + nc))
                counter += 1
    if not found:
        return False, -1, sr, sc

    # Walk parents back from the goal to the cell that follows the start.
    start = sr * w + sc
    cur = gr * w + gc
    while parent[cur // w, cur % w] != start:
        cur = int(parent[cur // w, cur % w])
    return True, int(g[gr, gc]), cur // w, cur % w

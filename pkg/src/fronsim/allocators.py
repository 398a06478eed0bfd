"""Allocator baselines for the benchmark harness.

These replace only the goal-selection stage; the execution layer stays
unchanged. ``greedy`` sends each robot to its nearest reachable frontier
independently (duplicates allowed). ``hungarian`` and ``auction`` build a
robots x frontiers BFS-distance cost matrix (unreachable pairs prohibited)
and compute a min-cost matching of min(N, |F|) pairs; robots left unmatched
or only matchable through prohibited pairs get no goal.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .assignment import nearest_reachable
from .errors import ConfigurationError
from .grid import Cell, DistanceField

PROHIBITED = math.inf


def distance_cost_matrix(
    frontiers: Sequence[Cell], fields: Sequence[DistanceField]
) -> np.ndarray:
    """Rows are robots, columns frontiers; unreachable pairs are +inf."""
    cost = np.full((len(fields), len(frontiers)), PROHIBITED)
    for i, fld in enumerate(fields):
        for k, f in enumerate(frontiers):
            d = int(fld.dist[f])
            if d >= 0:
                cost[i, k] = float(d)
    return cost


def hungarian(cost: np.ndarray) -> list[Optional[int]]:
    """Min-cost matching on a rectangular cost matrix with prohibited (+inf)
    entries. Returns, per row, the matched column or None.

    Maximizes the number of finite-cost pairs first, then minimizes their
    total cost (prohibited entries are replaced by a large finite surrogate
    and stripped from the result).
    """
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return [None] * n_rows
    if n_rows > n_cols:
        transposed = hungarian(cost.T)
        out: list[Optional[int]] = [None] * n_rows
        for col, row in enumerate(transposed):
            if row is not None:
                out[row] = col
        return out

    finite = cost[np.isfinite(cost)]
    big = (float(finite.max()) if finite.size else 1.0) * (n_rows + n_cols + 1) + 1.0
    padded = np.where(np.isfinite(cost), cost, big)

    # Potentials method, 1-indexed with a virtual column 0.
    inf = math.inf
    u = [0.0] * (n_rows + 1)
    v = [0.0] * (n_cols + 1)
    match = [0] * (n_cols + 1)  # match[j] = row occupying column j (1-indexed)
    way = [0] * (n_cols + 1)
    for i in range(1, n_rows + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n_cols + 1)
        used = [False] * (n_cols + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            for j in range(1, n_cols + 1):
                if used[j]:
                    continue
                cur = padded[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n_cols + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    result: list[Optional[int]] = [None] * n_rows
    for j in range(1, n_cols + 1):
        if match[j] != 0:
            row = match[j] - 1
            if math.isfinite(cost[row, j - 1]):
                result[row] = j - 1
    return result


def auction(cost: np.ndarray, eps: float = 1.0) -> list[Optional[int]]:
    """Forward auction at a fixed epsilon (one cell by default) on a
    min-cost assignment; prices start at zero.

    At termination every assigned pair satisfies epsilon-complementary
    slackness and never-bid columns keep price zero, so the total cost is
    within n * eps of optimal on rectangular instances. Bidders whose best
    net value falls below the dropout floor stay unassigned, which covers
    prohibited pairs and more robots than frontiers. (Price retention across
    epsilon-scaling phases would void the bound here: stale prices can land
    on columns the final matching leaves unassigned.)
    """
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return [None] * n_rows
    value = -cost  # maximize value

    finite = cost[np.isfinite(cost)]
    floor = -(float(finite.max()) if finite.size else 1.0) * (n_rows + n_cols + 1) - 1.0

    owner: list[Optional[int]] = [None] * n_cols
    assigned: list[Optional[int]] = [None] * n_rows
    dropped = [False] * n_rows
    prices = np.zeros(n_cols)
    queue = list(range(n_rows))
    while queue:
        i = queue.pop(0)
        if dropped[i] or assigned[i] is not None:
            continue
        best_j = -1
        best_net = -math.inf
        second_net = -math.inf
        for j in range(n_cols):
            if not math.isfinite(value[i, j]):
                continue
            net = value[i, j] - prices[j]
            if net > best_net:
                second_net = best_net
                best_net = net
                best_j = j
            elif net > second_net:
                second_net = net
        if best_j < 0 or best_net < floor:
            dropped[i] = True
            continue
        if second_net == -math.inf:
            second_net = floor
        prices[best_j] += best_net - second_net + eps
        previous = owner[best_j]
        owner[best_j] = i
        assigned[i] = best_j
        if previous is not None:
            assigned[previous] = None
            queue.append(previous)
    return assigned


def allocate(
    kind: str,
    frontiers: Sequence[Cell],
    fields: Sequence[DistanceField],
) -> list[Optional[Cell]]:
    """Per-robot goals under a baseline allocator (None = no goal)."""
    n = len(fields)
    if not frontiers:
        return [None] * n
    if kind == "greedy":
        return [nearest_reachable(frontiers, fld) for fld in fields]
    cost = distance_cost_matrix(frontiers, fields)
    if kind == "hungarian":
        cols = hungarian(cost)
    elif kind == "auction":
        cols = auction(cost)
    else:
        raise ConfigurationError(f"unknown allocator kind {kind!r}")
    return [frontiers[j] if j is not None else None for j in cols]

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid-search kernels.

Twin of ``fronsim.kernels._py``: same neighbour expansion order (up, down,
left, right), same (f, insertion-counter) tie-breaking in the A* heap, same
return conventions. Keep the two files in lockstep; the parity tests compare
them on randomized instances.
"""

import numpy as np

DEF FREE = 0
DEF UNREACHABLE = -1

cdef int[4] NBR_DR = [-1, 1, 0, 0]
cdef int[4] NBR_DC = [0, 0, -1, 1]


def bfs_fill(const signed char[:, :] cells, int sr, int sc):
    """Unit-cost BFS distances from (sr, sc) through free cells (-1 unreachable)."""
    cdef int h = cells.shape[0]
    cdef int w = cells.shape[1]
    out = np.full((h, w), UNREACHABLE, dtype=np.int32)
    cdef int[:, :] dist = out
    if cells[sr, sc] != FREE:
        return out
    queue_arr = np.empty(h * w, dtype=np.int32)
    cdef int[:] queue = queue_arr
    cdef int head = 0
    cdef int tail = 0
    cdef int cur, r, c, nr, nc, k, d
    dist[sr, sc] = 0
    queue[0] = sr * w + sc
    tail = 1
    while head < tail:
        cur = queue[head]
        head += 1
        r = cur / w
        c = cur % w
        d = dist[r, c] + 1
        for k in range(4):
            nr = r + NBR_DR[k]
            nc = c + NBR_DC[k]
            if 0 <= nr < h and 0 <= nc < w and cells[nr, nc] == FREE and dist[nr, nc] == UNREACHABLE:
                dist[nr, nc] = d
                queue[tail] = nr * w + nc
                tail += 1
    return out


cdef inline void _heap_push(long long* keys, int* payload, int* size, long long key, int cell):
    cdef int i = size[0]
    cdef int p
    keys[i] = key
    payload[i] = cell
    size[0] = i + 1
    while i > 0:
        p = (i - 1) >> 1
        if keys[p] <= keys[i]:
            break
        keys[p], keys[i] = keys[i], keys[p]
        payload[p], payload[i] = payload[i], payload[p]
        i = p


cdef inline int _heap_pop(long long* keys, int* payload, int* size):
    cdef int result = payload[0]
    cdef int n = size[0] - 1
    cdef int i = 0
    cdef int child
    size[0] = n
    keys[0] = keys[n]
    payload[0] = payload[n]
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and keys[child + 1] < keys[child]:
            child += 1
        if keys[i] <= keys[child]:
            break
        keys[i], keys[child] = keys[child], keys[i]
        payload[i], payload[child] = payload[child], payload[i]
        i = child
    return result


def astar_first_step(const signed char[:, :] cells, const unsigned char[:, :] blocked,
                     int sr, int sc, int gr, int gc):
    """A* (Manhattan heuristic) over free, non-blocked cells.

    Returns (ok, cost, first_r, first_c); see the pure-Python twin for the
    exact contract.
    """
    cdef int h = cells.shape[0]
    cdef int w = cells.shape[1]
    if sr == gr and sc == gc:
        return True, 0, sr, sc
    if cells[gr, gc] != FREE or blocked[gr, gc]:
        return False, -1, sr, sc

    g_arr = np.full((h, w), -1, dtype=np.int32)
    parent_arr = np.full((h, w), -1, dtype=np.int32)
    closed_arr = np.zeros((h, w), dtype=np.uint8)
    cdef int[:, :] g = g_arr
    cdef int[:, :] parent = parent_arr
    cdef unsigned char[:, :] closed = closed_arr

    cdef int cap = 4 * h * w + 8
    keys_arr = np.empty(cap, dtype=np.int64)
    cells_heap_arr = np.empty(cap, dtype=np.int32)
    cdef long long[:] keys_mv = keys_arr
    cdef int[:] payload_mv = cells_heap_arr
    cdef long long* keys = &keys_mv[0]
    cdef int* payload = &payload_mv[0]
    cdef int size = 0

    # Lexicographic (f, counter) order packed into one integer key.
    cdef long long stride = <long long> cap + 1
    cdef long long counter = 0
    cdef int cell, r, c, nr, nc, k, ng
    cdef int found = 0
    cdef int start = sr * w + sc
    cdef long long f0 = abs(sr - gr) + abs(sc - gc)

    g[sr, sc] = 0
    _heap_push(keys, payload, &size, f0 * stride + counter, start)
    counter += 1
    while size > 0:
        cell = _heap_pop(keys, payload, &size)
        r = cell / w
        c = cell % w
        if closed[r, c]:
            continue
        closed[r, c] = 1
        if r == gr and c == gc:
            found = 1
            break
        ng = g[r, c] + 1
        for k in range(4):
            nr = r + NBR_DR[k]
            nc = c + NBR_DC[k]
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            if cells[nr, nc] != FREE or blocked[nr, nc] or closed[nr, nc]:
                continue
            if g[nr, nc] == -1 or ng < g[nr, nc]:
                g[nr, nc] = ng
                parent[nr, nc] = cell
                _heap_push(keys, payload, &size,
                           (<long long> (ng + abs(nr - gr) + abs(nc - gc))) * stride + counter,
                           nr * w + nc)
                counter += 1
    if not found:
        return False, -1, sr, sc

    cdef int cur = gr * w + gc
    while parent[cur / w, cur % w] != start:
        cur = parent[cur / w, cur % w]
    return True, int(g[gr, gc]), cur / w, cur % w

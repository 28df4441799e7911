"""Exhaustive minimum-risk path search over all simple 8-connected paths.

Independent oracle for the Dijkstra implementation: plain depth-first
enumeration with best-cost pruning, accumulating edge costs in path order
so an identical optimal path yields a bit-identical total.
"""

import math

SQRT2 = math.sqrt(2.0)

_STEPS = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]


def min_risk_exhaustive(p, start_cell, target_cell):
    """Return (best_cost, best_path) over every simple admissible path, or
    (inf, None) when the target is unreachable."""
    values = p.values
    zero = p.zero_mask
    h = p.geometry.spacing
    w_, h_ = p.geometry.width, p.geometry.height

    def edge(a, b):
        d = SQRT2 if (abs(a[0] - b[0]) + abs(a[1] - b[1])) == 2 else 1.0
        return 0.5 * (1.0 / values[a[1], a[0]] + 1.0 / values[b[1], b[0]]) * d * h

    best = [math.inf, None]
    visited = {start_cell}
    path = [start_cell]

    def dfs(cell, cost):
        if cost >= best[0]:
            return
        if cell == target_cell:
            best[0] = cost
            best[1] = list(path)
            return
        for dx, dy in _STEPS:
            n = (cell[0] + dx, cell[1] + dy)
            if not (0 <= n[0] < w_ and 0 <= n[1] < h_):
                continue
            if zero[n[1], n[0]] or n in visited:
                continue
            visited.add(n)
            path.append(n)
            dfs(n, cost + edge(cell, n))
            path.pop()
            visited.remove(n)

    dfs(start_cell, 0.0)
    return best[0], best[1]

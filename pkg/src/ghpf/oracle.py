"""Grid shortest-path oracle: exact minimum-risk paths by Dijkstra on the
8-connected cell graph, plus the planner-vs-oracle comparison record.

Edge risk uses the midpoint rule for the line integral of 1/P along the
edge: w(a, b) = 0.5 * (1/P_a + 1/P_b) * dist(a, b) * h with dist in
{1, sqrt(2)}.  Zero-probability cells are excluded from the graph.  Ties
are broken by lexicographic (iy, ix) cell order, so results are fully
deterministic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryMismatchError, UnreachableError
from .grid import Endpoints, ProbabilityGrid, validate_endpoints
from .policy import Trajectory, path_risk

_SQRT2 = math.sqrt(2.0)

_NEIGHBORS = (
    (-1, -1, _SQRT2), (0, -1, 1.0), (1, -1, _SQRT2),
    (-1, 0, 1.0), (1, 0, 1.0),
    (-1, 1, _SQRT2), (0, 1, 1.0), (1, 1, _SQRT2),
)


@dataclass
class OraclePath:
    """8-connected cell path; total_risk is the exact sum of its edge weights
    in start-to-target order."""

    cells: list[tuple[int, int]]
    total_risk: float

    @property
    def n_cells(self) -> int:
        return len(self.cells)


def _edge_weight(inv_p: np.ndarray, a: tuple[int, int], b: tuple[int, int],
                 dist: float, h: float) -> float:
    return 0.5 * (inv_p[a[1], a[0]] + inv_p[b[1], b[0]]) * dist * h


def path_cells_risk(p: ProbabilityGrid, cells: list[tuple[int, int]]) -> float:
    """Risk of an explicit cell path, summed in path order."""
    inv_p = 1.0 / np.where(p.zero_mask, np.inf, p.values)
    h = p.geometry.spacing
    total = 0.0
    for a, b in zip(cells[:-1], cells[1:]):
        dx, dy = abs(b[0] - a[0]), abs(b[1] - a[1])
        if max(dx, dy) != 1:
            raise GeometryMismatchError(f"cells {a} and {b} are not 8-neighbors")
        dist = _SQRT2 if dx + dy == 2 else 1.0
        total += _edge_weight(inv_p, a, b, dist, h)
    return float(total)


def dijkstra_min_risk(p: ProbabilityGrid, endpoints: Endpoints) -> OraclePath:
    """Exactly optimal min-risk path on the admissible 8-connected graph."""
    (sx, sy), (tx, ty) = validate_endpoints(p, endpoints)
    geom = p.geometry
    w, h = geom.width, geom.height
    inv_p = 1.0 / np.where(p.zero_mask, np.inf, p.values)
    blocked = p.zero_mask

    dist = np.full((h, w), np.inf)
    settled = np.zeros((h, w), dtype=bool)
    pred = {}
    dist[sy, sx] = 0.0
    heap = [(0.0, (sy, sx))]
    target = (ty, tx)
    while heap:
        d, (jy, jx) = heapq.heappop(heap)
        if settled[jy, jx]:
            continue
        settled[jy, jx] = True
        if (jy, jx) == target:
            break
        for ddx, ddy, step in _NEIGHBORS:
            nx, ny = jx + ddx, jy + ddy
            if not (0 <= nx < w and 0 <= ny < h) or blocked[ny, nx] or settled[ny, nx]:
                continue
            nd = d + _edge_weight(inv_p, (jx, jy), (nx, ny), step, geom.spacing)
            if nd < dist[ny, nx]:
                dist[ny, nx] = nd
                pred[(ny, nx)] = (jy, jx)
                heapq.heappush(heap, (nd, (ny, nx)))

    if not np.isfinite(dist[ty, tx]):
        raise UnreachableError("no admissible 8-connected path between start and target")

    rev = [(tx, ty)]
    node = (ty, tx)
    while node != (sy, sx):
        node = pred[node]
        rev.append((node[1], node[0]))
    cells = rev[::-1]
    return OraclePath(cells=cells, total_risk=path_cells_risk(p, cells))


def _max_turn_per_length(points: np.ndarray) -> float:
    """Max over interior vertices of |turn angle| / mean adjacent segment length."""
    if len(points) < 3:
        return 0.0
    segs = np.diff(points, axis=0)
    lens = np.hypot(segs[:, 0], segs[:, 1])
    worst = 0.0
    for k in range(1, len(points) - 1):
        a, b = segs[k - 1], segs[k]
        la, lb = lens[k - 1], lens[k]
        if la == 0.0 or lb == 0.0:
            continue
        cross = a[0] * b[1] - a[1] * b[0]
        dot = a[0] * b[0] + a[1] * b[1]
        ang = abs(math.atan2(cross, dot))
        worst = max(worst, ang / (0.5 * (la + lb)))
    return worst


@dataclass
class PathComparison:
    ghpf_risk: float
    oracle_risk: float
    ratio: float
    ghpf_length: float
    oracle_length: float
    ghpf_max_turn_per_length: float
    oracle_max_turn_per_length: float

    def to_dict(self) -> dict:
        return {
            "ghpf_risk": self.ghpf_risk,
            "oracle_risk": self.oracle_risk,
            "ratio": self.ratio,
            "ghpf_length": self.ghpf_length,
            "oracle_length": self.oracle_length,
            "ghpf_max_turn_per_length": self.ghpf_max_turn_per_length,
            "oracle_max_turn_per_length": self.oracle_max_turn_per_length,
        }


def compare_paths(ghpf_traj: Trajectory, oracle: OraclePath,
                  p: ProbabilityGrid) -> PathComparison:
    """Risk, length and smoothness comparison of the two routes.

    The ratio is reported, not judged: the continuous streamline can
    legitimately beat the 8-connected graph optimum by a small margin.
    """
    geom = p.geometry
    for x, y in ghpf_traj.points:
        if not geom.in_hull(x, y):
            raise GeometryMismatchError(f"trajectory sample ({x}, {y}) outside the map domain")
    for ix, iy in oracle.cells:
        if not (0 <= ix < geom.width and 0 <= iy < geom.height):
            raise GeometryMismatchError(f"oracle cell ({ix}, {iy}) outside the map")
    ghpf_risk = path_risk(ghpf_traj, floor=p.floor)
    oracle_pts = np.asarray([geom.cell_center(ix, iy) for ix, iy in oracle.cells])
    seg = np.diff(oracle_pts, axis=0)
    oracle_length = float(np.hypot(seg[:, 0], seg[:, 1]).sum()) if len(oracle_pts) > 1 else 0.0
    return PathComparison(
        ghpf_risk=ghpf_risk,
        oracle_risk=oracle.total_risk,
        ratio=ghpf_risk / oracle.total_risk if oracle.total_risk > 0.0 else math.inf,
        ghpf_length=ghpf_traj.length,
        oracle_length=oracle_length,
        ghpf_max_turn_per_length=_max_turn_per_length(ghpf_traj.points),
        oracle_max_turn_per_length=_max_turn_per_length(oracle_pts),
    )

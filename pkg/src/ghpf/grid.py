"""Grid data model: geometry, probabilistic maps, vector fields, endpoints.

Conventions used throughout the package:
  * arrays are indexed ``values[iy, ix]`` (row-major, shape ``(height, width)``);
  * cell ``(ix, iy)`` has its center at ``((ix + 0.5) * h, (iy + 0.5) * h)``;
  * grids are immutable after construction (arrays are marked read-only), so
    concurrent read access is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GeometryMismatchError,
    OutOfDomainError,
    ParameterError,
    PreconditionError,
)

Array = np.ndarray

DEFAULT_FLOOR = 1.0e-6


@dataclass(frozen=True)
class GridGeometry:
    """Uniform 2D grid of square cells with spacing ``spacing``."""

    width: int
    height: int
    spacing: float = 1.0

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ParameterError(
                f"grid must be at least 3x3, got {self.width}x{self.height}"
            )
        if not (isinstance(self.spacing, (int, float)) and math.isfinite(self.spacing)
                and self.spacing > 0.0):
            raise ParameterError(f"spacing must be a positive finite number, got {self.spacing!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def extent(self) -> tuple[float, float]:
        """Physical size (x_max, y_max) of the domain."""
        return (self.width * self.spacing, self.height * self.spacing)

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        h = self.spacing
        return ((ix + 0.5) * h, (iy + 0.5) * h)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell containing the continuous point (x, y)."""
        xmax, ymax = self.extent
        if not (0.0 <= x < xmax and 0.0 <= y < ymax):
            raise OutOfDomainError(f"point ({x}, {y}) outside domain [0,{xmax})x[0,{ymax})")
        return (int(x / self.spacing), int(y / self.spacing))

    def contains(self, x: float, y: float) -> bool:
        xmax, ymax = self.extent
        return 0.0 < x < xmax and 0.0 < y < ymax

    def hull(self) -> tuple[float, float, float, float]:
        """Bounding box of the cell centers: (xmin, xmax, ymin, ymax).

        Bilinear interpolation of cell-centered data is defined exactly on
        this region.
        """
        h = self.spacing
        return (0.5 * h, (self.width - 0.5) * h, 0.5 * h, (self.height - 0.5) * h)

    def in_hull(self, x: float, y: float) -> bool:
        x0, x1, y0, y1 = self.hull()
        return x0 <= x <= x1 and y0 <= y <= y1

    def clamp_to_hull(self, x: float, y: float) -> tuple[float, float]:
        x0, x1, y0, y1 = self.hull()
        return (min(max(x, x0), x1), min(max(y, y0), y1))


def _require_same_geometry(a: GridGeometry, b: GridGeometry, what: str) -> None:
    if a != b:
        raise GeometryMismatchError(f"{what}: {a} vs {b}")


def _readonly(arr: Array) -> Array:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(eq=False)
class ProbabilityGrid:
    """Cell-centered suitability descriptor with values in [0, 1].

    ``floor`` is the conductivity floor applied at solve time: the solver
    works with ``max(values, floor)`` so that zero-probability cells behave
    as near-perfect insulators while the boundary value problem stays
    well posed.  The set of exactly-zero cells is kept as ``zero_mask``.
    """

    geometry: GridGeometry
    values: Array
    floor: float = DEFAULT_FLOOR
    zero_mask: Array = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.geometry.shape:
            raise GeometryMismatchError(
                f"value array shape {v.shape} does not match geometry {self.geometry.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ParameterError("map values must all be finite")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ParameterError("map values must lie in [0, 1]")
        if not (0.0 < self.floor < 1.0):
            raise ParameterError(f"probability floor must be in (0, 1), got {self.floor}")
        self.values = _readonly(v)
        zm = self.values == 0.0
        zm.setflags(write=False)
        self.zero_mask = zm

    def conductivity(self, floor: float | None = None) -> Array:
        """Floored values used as the solver's conductivity field."""
        eps = self.floor if floor is None else floor
        return np.maximum(self.values, eps)

    def with_values(self, values: Array) -> "ProbabilityGrid":
        return ProbabilityGrid(self.geometry, values, floor=self.floor)


@dataclass(eq=False)
class VectorFieldGrid:
    """Cell-centered 2D vector field (drift, or an exported policy)."""

    geometry: GridGeometry
    vx: Array
    vy: Array

    def __post_init__(self):
        vx = np.asarray(self.vx, dtype=np.float64)
        vy = np.asarray(self.vy, dtype=np.float64)
        if vx.shape != self.geometry.shape or vy.shape != self.geometry.shape:
            raise GeometryMismatchError(
                f"component shapes {vx.shape}/{vy.shape} do not match geometry {self.geometry.shape}"
            )
        if not (np.all(np.isfinite(vx)) and np.all(np.isfinite(vy))):
            raise ParameterError("vector field components must all be finite")
        self.vx = _readonly(vx)
        self.vy = _readonly(vy)

    def magnitude(self) -> Array:
        return np.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class Endpoints:
    """Continuous start and target coordinates, both in admissible cells."""

    start: tuple[float, float]
    target: tuple[float, float]


def validate_endpoints(p: ProbabilityGrid, endpoints: Endpoints):
    """Snap endpoints to cells and enforce their preconditions.

    Returns ``((sx, sy), (tx, ty))`` cell indices.  Raises PreconditionError
    if either point is outside the grid, inside a zero-probability cell, or
    if the two points snap to the same cell.
    """
    geom = p.geometry
    cells = []
    for name, (x, y) in (("start", endpoints.start), ("target", endpoints.target)):
        if not geom.contains(x, y):
            raise PreconditionError(f"{name} point ({x}, {y}) not strictly inside the grid")
        ix, iy = geom.cell_of(x, y)
        if p.zero_mask[iy, ix]:
            raise PreconditionError(f"{name} point ({x}, {y}) lies in a zero-probability cell")
        cells.append((ix, iy))
    if cells[0] == cells[1]:
        raise PreconditionError("start and target snap to the same cell")
    return cells[0], cells[1]


def bilinear_at(arr: Array, geom: GridGeometry, x: float, y: float) -> float:
    """Bilinear interpolation of a cell-centered scalar array at (x, y).

    The point must lie inside the hull of cell centers.
    """
    if not geom.in_hull(x, y):
        raise OutOfDomainError(f"point ({x}, {y}) outside interpolation hull")
    h = geom.spacing
    u = x / h - 0.5
    w = y / h - 0.5
    i0 = min(int(u), geom.width - 2)
    j0 = min(int(w), geom.height - 2)
    tu = u - i0
    tw = w - j0
    a00 = arr[j0, i0]
    a10 = arr[j0, i0 + 1]
    a01 = arr[j0 + 1, i0]
    a11 = arr[j0 + 1, i0 + 1]
    return ((1.0 - tu) * (1.0 - tw) * a00 + tu * (1.0 - tw) * a10
            + (1.0 - tu) * tw * a01 + tu * tw * a11)


def binary_quantize(grid: ProbabilityGrid, threshold: float) -> ProbabilityGrid:
    """Quantize a map to {0, 1}: cells at or above the threshold become 1."""
    if not (0.0 < threshold < 1.0):
        raise ParameterError(f"threshold must be in (0, 1), got {threshold}")
    out = np.where(grid.values >= threshold, 1.0, 0.0)
    return grid.with_values(out)


def make_white_noise_map(geometry: GridGeometry, seed: int,
                         floor: float = DEFAULT_FLOOR) -> ProbabilityGrid:
    """I.i.d. uniform map with values in (0, 1]; deterministic per seed."""
    rng = np.random.default_rng(seed)
    # 1 - U(0,1) maps [0,1) to (0,1]: the zero set stays empty.
    v = 1.0 - rng.random(geometry.shape)
    return ProbabilityGrid(geometry, v, floor=floor)

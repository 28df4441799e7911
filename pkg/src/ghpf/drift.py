"""Drift-sensitive planning: pointwise drift cost, drift descriptor, and the
nonlinear BVP solved by an outer fixed-point (Picard) loop with mixing.

The descriptor makes conductivity depend on the angle between the motion
direction -grad(V) and the drift vector: aligned drift raises conductivity
(cheap to move), opposing drift lowers it.  The descriptor itself depends on
grad(V), so the linear solver sits inside an outer loop: solve, re-evaluate
the descriptor, mix, repeat.  Convergence of the outer loop is monitored and
reported, never assumed.

Descriptors are K-homogeneous, so the loop works in units of K: the
returned descriptor grid stores P/K in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryMismatchError, ParameterError, PreconditionError
from .grid import (
    Endpoints,
    GridGeometry,
    ProbabilityGrid,
    VectorFieldGrid,
    bilinear_at,
    validate_endpoints,
)
from .policy import Trajectory
from .solver import PotentialGrid, SolverConfig, SolverReport, sor_solve

Array = np.ndarray


@dataclass
class DriftConfig:
    """Outer-loop parameters.  ``neutral`` (= K/2) is the descriptor value
    used wherever the alignment angle is undefined."""

    k: float = 1.0
    outer_tol: float = 1.0e-3
    outer_max_iters: int = 50
    alpha: float = 0.5

    def __post_init__(self):
        if not (self.k > 0.0):
            raise ParameterError(f"cost ceiling K must be positive, got {self.k}")
        if not (0.0 < self.alpha <= 1.0):
            raise ParameterError(f"mixing alpha must be in (0, 1], got {self.alpha}")
        if not (self.outer_tol > 0.0):
            raise ParameterError(f"outer_tol must be positive, got {self.outer_tol}")
        if self.outer_max_iters < 1:
            raise ParameterError(f"outer_max_iters must be >= 1, got {self.outer_max_iters}")

    @property
    def neutral(self) -> float:
        return 0.5 * self.k


def _alignment(grad_v, psi) -> float | None:
    """cos of the angle between grad(V) and psi, or None when undefined."""
    gx, gy = float(grad_v[0]), float(grad_v[1])
    px, py = float(psi[0]), float(psi[1])
    ng = math.hypot(gx, gy)
    np_ = math.hypot(px, py)
    if ng == 0.0 or np_ == 0.0:
        return None
    c = (gx * px + gy * py) / (ng * np_)
    return min(1.0, max(-1.0, c))


def point_cost_fc(grad_v, psi, k: float = 1.0) -> float:
    """Drift cost in [0, K]: 0 when drift is parallel to the motion direction
    -grad(V), K when fully opposing, K/2 when the angle is undefined."""
    if not (k > 0.0):
        raise ParameterError(f"cost ceiling K must be positive, got {k}")
    c = _alignment(grad_v, psi)
    if c is None:
        return 0.5 * k
    return 0.5 * k * (1.0 + c)


def drift_descriptor(grad_v, psi, k: float = 1.0) -> float:
    """Descriptor value K - Fc in [0, K]."""
    return k - point_cost_fc(grad_v, psi, k)


def _descriptor_field(v: PotentialGrid, psi: VectorFieldGrid) -> Array:
    """Per-cell descriptor in units of K: (1 - cos(angle(grad V, psi))) / 2,
    with the neutral value 1/2 where either vector vanishes."""
    gx, gy = v.gradients()
    ng = np.hypot(gx, gy)
    npsi = np.hypot(psi.vx, psi.vy)
    denom = ng * npsi
    safe = np.where(denom > 0.0, denom, 1.0)
    c = np.clip((gx * psi.vx + gy * psi.vy) / safe, -1.0, 1.0)
    u = 0.5 * (1.0 - c)
    return np.where(denom > 0.0, u, 0.5)


@dataclass
class DriftSolution:
    """Final potential, converged effective descriptor (stored as P/K), and the
    combined report; ``trace`` holds the per-iteration outer-loop record."""

    potential: PotentialGrid
    descriptor: ProbabilityGrid
    report: SolverReport
    outer_iterations: int
    outer_converged: bool
    trace: list[dict] = field(default_factory=list)


def solve_drift_bvp(psi: VectorFieldGrid, obstacles: ProbabilityGrid,
                    endpoints: Endpoints,
                    dcfg: DriftConfig | None = None,
                    scfg: SolverConfig | None = None) -> DriftSolution:
    """Fixed-point solve of the drift-sensitive BVP.

    Starts from the neutral descriptor (K/2 outside obstacles, 0 on them),
    alternates linear gamma-harmonic solves with descriptor re-evaluation,
    and mixes updates with factor alpha.  Stops when the max per-cell change
    drops to outer_tol (in units of K) or at the iteration cap; the returned
    flags distinguish the two.  Obstacle cells are held at zero (floored at
    solve time) on every iteration.
    """
    dcfg = dcfg or DriftConfig()
    scfg = scfg or SolverConfig()
    if psi.geometry != obstacles.geometry:
        raise GeometryMismatchError("drift field and obstacle map geometries differ")
    o_mask = obstacles.zero_mask
    # endpoint validation against the obstacle set
    validate_endpoints(obstacles, endpoints)

    geom = obstacles.geometry
    u = np.where(o_mask, 0.0, 0.5)
    floor = scfg.epsilon_floor if scfg.epsilon_floor is not None else obstacles.floor

    trace: list[dict] = []
    potential: PotentialGrid | None = None
    report: SolverReport | None = None
    total_inner = 0
    total_time = 0.0
    outer_converged = False
    inner_all_converged = True
    outer_iterations = 0
    warm: Array | None = None

    for outer_iterations in range(1, dcfg.outer_max_iters + 1):
        p_grid = ProbabilityGrid(geom, u, floor=floor)
        potential, report = sor_solve(p_grid, endpoints, scfg, initial=warm)
        warm = potential.values
        total_inner += report.iterations
        total_time += report.wall_time
        inner_all_converged &= report.converged

        u_hat = _descriptor_field(potential, psi)
        u_next = u + dcfg.alpha * (u_hat - u)
        u_next = np.where(o_mask, 0.0, u_next)
        delta = float(np.abs(u_next - u).max())
        trace.append({
            "outer_iteration": outer_iterations,
            "max_descriptor_change": delta,
            "inner_residual": report.final_residual,
            "inner_iterations": report.iterations,
            "inner_converged": report.converged,
        })
        u = u_next
        if delta <= dcfg.outer_tol:
            outer_converged = True
            break

    assert potential is not None and report is not None
    descriptor = ProbabilityGrid(geom, u, floor=floor)
    combined = SolverReport(
        iterations=total_inner,
        final_residual=report.final_residual,
        converged=inner_all_converged and outer_converged,
        dirichlet_energy=report.dirichlet_energy,
        wall_time=total_time,
    )
    return DriftSolution(
        potential=potential,
        descriptor=descriptor,
        report=combined,
        outer_iterations=outer_iterations,
        outer_converged=outer_converged,
        trace=trace,
    )


def vortex_field(geometry: GridGeometry, center: tuple[float, float],
                 strength: float, ccw: bool = True) -> VectorFieldGrid:
    """Rotational drift about ``center``; finite everywhere including the
    center cell (the radius is floored at one cell spacing)."""
    h = geometry.spacing
    xs = (np.arange(geometry.width) + 0.5) * h
    ys = (np.arange(geometry.height) + 0.5) * h
    rx = xs[None, :] - center[0]
    ry = ys[:, None] - center[1]
    r = np.maximum(np.hypot(rx, ry), h)
    vx = -strength * ry / r
    vy = strength * rx / r
    if not ccw:
        vx = -vx
        vy = -vy
    return VectorFieldGrid(geometry, vx, vy)


def _box_smooth(a: Array, half: int) -> Array:
    """Separable box filter with reflect padding; half=0 is the identity."""
    if half == 0:
        return a.copy()
    size = 2 * half + 1

    def smooth_axis(arr, axis):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (half, half)
        padded = np.pad(arr, pad, mode="reflect")
        c = np.cumsum(padded, axis=axis, dtype=np.float64)
        zero = np.zeros_like(np.take(c, [0], axis=axis))
        c = np.concatenate([zero, c], axis=axis)
        n = arr.shape[axis]
        upper = np.take(c, np.arange(size, size + n), axis=axis)
        lower = np.take(c, np.arange(0, n), axis=axis)
        return (upper - lower) / size

    return smooth_axis(smooth_axis(a, 0), 1)


def _smoothed_noise(geometry: GridGeometry, rng: np.random.Generator,
                    correlation_length: int) -> Array:
    raw = rng.standard_normal(geometry.shape)
    return _box_smooth(raw, correlation_length - 1)


def correlated_noise_field(geometry: GridGeometry, seed: int,
                           correlation_length: int) -> VectorFieldGrid:
    """White noise per component, box-smoothed to the requested correlation
    length, then jointly rescaled to unit maximum magnitude.  A correlation
    length of 1 leaves the raw noise untouched before the rescale."""
    if correlation_length < 1:
        raise ParameterError(f"correlation_length must be >= 1, got {correlation_length}")
    rng = np.random.default_rng(seed)
    vx = _smoothed_noise(geometry, rng, correlation_length)
    vy = _smoothed_noise(geometry, rng, correlation_length)
    mmax = float(np.hypot(vx, vy).max())
    if mmax > 0.0:
        vx = vx / mmax
        vy = vy / mmax
    return VectorFieldGrid(geometry, vx, vy)


def accumulated_utility(traj: Trajectory, psi: VectorFieldGrid,
                        v: PotentialGrid, k: float = 1.0) -> float:
    """Drift cost integrated along the trajectory: sum of Fc * ds.

    Under the arc-length parameterization of the streamline integrator the
    time-weighted form of the cost reduces to this pure line integral.
    Zero exactly when drift aids motion at every sample.
    """
    if psi.geometry != v.geometry:
        raise GeometryMismatchError("drift field and potential geometries differ")
    geom = v.geometry
    gx, gy = v.gradients()
    total = 0.0
    for (x, y), ds in zip(traj.points, traj.ds):
        if ds == 0.0:
            continue
        if not geom.in_hull(x, y):
            raise GeometryMismatchError(f"trajectory sample ({x}, {y}) outside the field domain")
        g = (bilinear_at(gx, geom, x, y), bilinear_at(gy, geom, x, y))
        w = (bilinear_at(psi.vx, geom, x, y), bilinear_at(psi.vy, geom, x, y))
        total += point_cost_fc(g, w, k) * ds
    return total

"""Navigation policy: gradient sampling, streamline integration, path metrics,
and critical-point detection on a solved potential.

Streamlines follow the unit-normalized descent direction -grad(V)/|grad(V)|,
so the step parameter is a geometric arc-length step.  The potential spans
many orders of magnitude away from the pins; normalizing keeps the integral
curves identical while making step control uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryMismatchError, OutOfDomainError, ParameterError, PreconditionError
from .grid import GridGeometry, ProbabilityGrid, VectorFieldGrid, bilinear_at
from .solver import PotentialGrid

Array = np.ndarray

REACHED_TARGET = "reached_target"
MAX_STEPS = "max_steps"
STALLED = "stalled"


@dataclass
class StreamlineParams:
    """Integration controls; lengths are in cells (multiplied by spacing)."""

    step_size: float = 0.25
    capture_radius: float = 1.0
    max_steps: int | None = None
    stall_grad: float = 1.0e-30

    def resolved_max_steps(self, geom: GridGeometry) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return 50 * (geom.width + geom.height)


@dataclass
class Trajectory:
    """Polyline of samples with per-sample map value, |grad V| and step length."""

    points: Array      # (n, 2) continuous coordinates
    p_values: Array    # raw map value of the containing cell
    grad_norms: Array  # |grad V| interpolated at the sample
    ds: Array          # distance from the previous sample; ds[0] == 0
    status: str

    @property
    def length(self) -> float:
        return float(self.ds.sum())

    @property
    def n_samples(self) -> int:
        return len(self.points)


def gradient_at(v: PotentialGrid, point: tuple[float, float]) -> tuple[float, float]:
    """Interpolated grad(V) at a continuous point strictly inside the hull of
    cell centers.  Central differences at cell centers, bilinear in between;
    exact for potentials linear in x and y."""
    x, y = point
    if not v.geometry.in_hull(x, y):
        raise OutOfDomainError(f"point ({x}, {y}) outside the interior margin")
    gx, gy = v.gradients()
    return (bilinear_at(gx, v.geometry, x, y), bilinear_at(gy, v.geometry, x, y))


def _staggered_x(cx: Array, geom: GridGeometry, x: float, y: float) -> float:
    """Bilinear sample of the x-face current lattice (faces at x = i*h)."""
    h = geom.spacing
    u = min(max(x / h, 0.0), float(geom.width))
    w = min(max(y / h - 0.5, 0.0), geom.height - 1.0)
    i0 = min(int(u), geom.width - 1)
    j0 = min(int(w), geom.height - 2)
    tu = u - i0
    tw = w - j0
    return ((1.0 - tu) * (1.0 - tw) * cx[j0, i0] + tu * (1.0 - tw) * cx[j0, i0 + 1]
            + (1.0 - tu) * tw * cx[j0 + 1, i0] + tu * tw * cx[j0 + 1, i0 + 1])


def _staggered_y(cy: Array, geom: GridGeometry, x: float, y: float) -> float:
    """Bilinear sample of the y-face current lattice (faces at y = j*h)."""
    h = geom.spacing
    u = min(max(x / h - 0.5, 0.0), geom.width - 1.0)
    w = min(max(y / h, 0.0), float(geom.height))
    i0 = min(int(u), geom.width - 2)
    j0 = min(int(w), geom.height - 1)
    tu = u - i0
    tw = w - j0
    return ((1.0 - tu) * (1.0 - tw) * cy[j0, i0] + tu * (1.0 - tw) * cy[j0, i0 + 1]
            + (1.0 - tu) * tw * cy[j0 + 1, i0] + tu * tw * cy[j0 + 1, i0 + 1])


def _descent_direction(v: PotentialGrid, x: float, y: float) -> tuple[float, float, float]:
    """Unit descent direction and field norm at (x, y), clamped to the hull.

    Samples the staggered face currents (parallel to -grad V) so the
    component normal to an insulating face vanishes at the face itself;
    the returned norm is the gradient-magnitude estimate |flow| / sigma.
    """
    px, py = v.geometry.clamp_to_hull(x, y)
    cx, cy = v.face_currents()
    ax = _staggered_x(cx, v.geometry, px, py)
    ay = _staggered_y(cy, v.geometry, px, py)
    norm = math.hypot(ax, ay)
    if norm == 0.0:
        return 0.0, 0.0, 0.0
    grad_norm = norm
    if v.conductivity is not None:
        ix, iy = v.geometry.cell_of(px, py)
        grad_norm = norm / v.conductivity[iy, ix]
    return ax / norm, ay / norm, grad_norm


def _eject_from_zero(p: ProbabilityGrid, prev: tuple[float, float],
                     pos: tuple[float, float]) -> tuple[float, float] | None:
    """Push a landing point out of a zero-probability cell through its
    nearest admissible face.

    The continuum flow moves tangentially along zero-region boundaries; the
    interpolated field reproduces that up to a thin contact layer, where
    wall-hugging paths can dip a fraction of a cell into boundary cells
    (worst at convex corners).  This restores the tangential contact.
    Returns None when no single-axis push lands in an admissible cell.
    """
    geom = p.geometry
    x, y = pos
    ix, iy = geom.cell_of(x, y)
    if not p.zero_mask[iy, ix]:
        return pos
    h = geom.spacing
    margin = 1.0e-9 * h
    candidates = []
    for nx_, ny_ in ((ix * h - margin, y), ((ix + 1) * h + margin, y),
                     (x, iy * h - margin), (x, (iy + 1) * h + margin)):
        cx, cy = geom.clamp_to_hull(nx_, ny_)
        jx, jy = geom.cell_of(cx, cy)
        if not p.zero_mask[jy, jx]:
            candidates.append(((cx - x) ** 2 + (cy - y) ** 2, (cx, cy)))
    if not candidates:
        return None
    candidates.sort(key=lambda c: c[0])
    return candidates[0][1]


def integrate_streamline(v: PotentialGrid, p: ProbabilityGrid,
                         seed: tuple[float, float],
                         params: StreamlineParams | None = None,
                         target: tuple[float, float] | None = None) -> Trajectory:
    """Trace the policy streamline from ``seed`` toward the target pin.

    Classical RK4 on the unit descent direction with spatial step
    ``step_size * h``.  Terminates on capture (within ``capture_radius * h``
    of the target), on the step budget, or on a stall (gradient below the
    stall threshold away from the target, which signals an under-converged
    solve rather than a planning result).  Zero-probability cells are a
    hard constraint: a step landing inside one is ejected through the
    nearest admissible face, realizing the tangential wall contact of the
    continuum flow (see ``_eject_from_zero``).
    """
    params = params or StreamlineParams()
    if p.geometry != v.geometry:
        raise GeometryMismatchError("probability map and potential geometries differ")
    geom = v.geometry
    if target is None:
        target = v.target_point
    if target is None:
        raise ParameterError("no target point: pass target= or solve via sor_solve")

    x, y = seed
    if not geom.in_hull(x, y):
        raise PreconditionError(f"seed ({x}, {y}) outside the grid interior")
    ix, iy = geom.cell_of(x, y)
    if p.zero_mask[iy, ix]:
        raise PreconditionError(f"seed ({x}, {y}) lies in a zero-probability cell")

    h = geom.spacing
    step = params.step_size * h
    capture2 = (params.capture_radius * h) ** 2
    max_steps = params.resolved_max_steps(geom)
    tx, ty = target

    pts = [(x, y)]
    ds = [0.0]
    norms = []
    pvals = []

    def record_metrics(px: float, py: float) -> None:
        cxi, cyi = geom.cell_of(px, py)
        pvals.append(p.values[cyi, cxi])
        _, _, n = _descent_direction(v, px, py)
        norms.append(n)

    record_metrics(x, y)
    status = MAX_STEPS
    for _ in range(max_steps):
        if (x - tx) ** 2 + (y - ty) ** 2 <= capture2:
            status = REACHED_TARGET
            break
        d1x, d1y, gn = _descent_direction(v, x, y)
        if gn < params.stall_grad:
            status = STALLED
            break
        half = 0.5 * step
        d2x, d2y, _ = _descent_direction(v, x + half * d1x, y + half * d1y)
        d3x, d3y, _ = _descent_direction(v, x + half * d2x, y + half * d2y)
        d4x, d4y, _ = _descent_direction(v, x + step * d3x, y + step * d3y)
        nx = x + (step / 6.0) * (d1x + 2.0 * d2x + 2.0 * d3x + d4x)
        ny = y + (step / 6.0) * (d1y + 2.0 * d2y + 2.0 * d3y + d4y)
        nx, ny = geom.clamp_to_hull(nx, ny)
        ejected = _eject_from_zero(p, (x, y), (nx, ny))
        if ejected is None:
            status = STALLED
            break
        nx, ny = ejected
        ds.append(math.hypot(nx - x, ny - y))
        x, y = nx, ny
        pts.append((x, y))
        record_metrics(x, y)
    else:
        status = MAX_STEPS
    if status == MAX_STEPS and (x - tx) ** 2 + (y - ty) ** 2 <= capture2:
        status = REACHED_TARGET

    return Trajectory(
        points=np.asarray(pts, dtype=np.float64),
        p_values=np.asarray(pvals, dtype=np.float64),
        grad_norms=np.asarray(norms, dtype=np.float64),
        ds=np.asarray(ds, dtype=np.float64),
        status=status,
    )


def path_risk(traj: Trajectory, floor: float | None = None) -> float:
    """Accumulated risk sum(ds / P) along the trajectory.

    Equals the arc length when P is 1 everywhere on the path.  Samples with
    nonpositive P are rejected unless a floor is supplied.
    """
    if traj.n_samples == 0:
        raise ParameterError("empty trajectory")
    pv = traj.p_values
    if floor is not None:
        pv = np.maximum(pv, floor)
    elif pv.min() <= 0.0:
        raise PreconditionError("trajectory crosses a zero-probability cell; pass a floor")
    return float((traj.ds / pv).sum())


def _headings(points: Array) -> Array:
    """Per-sample heading vectors: centered differences, one-sided at the ends."""
    n = len(points)
    out = np.empty_like(points)
    if n == 1:
        out[:] = 0.0
        return out
    out[0] = points[1] - points[0]
    out[-1] = points[-1] - points[-2]
    if n > 2:
        out[1:-1] = points[2:] - points[:-2]
    return out


def heading_drift_differential(traj: Trajectory, drift: VectorFieldGrid) -> Array:
    """Signed angle in (-pi, pi] between local heading and interpolated drift.

    Samples with zero drift magnitude yield NaN markers, which callers must
    exclude from statistics.  |angle| < pi/2 is the energy harvesting zone
    (drift doing positive work on the motion).
    """
    geom = drift.geometry
    for x, y in traj.points:
        if not geom.in_hull(x, y):
            raise GeometryMismatchError(
                f"trajectory sample ({x}, {y}) outside the drift field domain")
    heads = _headings(traj.points)
    out = np.empty(traj.n_samples)
    for k, ((hx, hy), (x, y)) in enumerate(zip(heads, traj.points)):
        dx = bilinear_at(drift.vx, geom, x, y)
        dy = bilinear_at(drift.vy, geom, x, y)
        if dx * dx + dy * dy == 0.0 or hx * hx + hy * hy == 0.0:
            out[k] = np.nan
            continue
        cross = dx * hy - dy * hx
        dot = dx * hx + dy * hy
        ang = math.atan2(cross, dot)
        if ang == -math.pi:
            ang = math.pi
        out[k] = ang
    return out


def harvesting_fraction(differential: Array) -> float:
    """Fraction of defined samples with |angle| < pi/2."""
    defined = differential[~np.isnan(differential)]
    if defined.size == 0:
        return float("nan")
    return float((np.abs(defined) < 0.5 * math.pi).mean())


def policy_vectors(v: PotentialGrid) -> VectorFieldGrid:
    """Unit-normalized descent directions per cell, zeros where the field vanishes."""
    jx, jy = v.flow_field()
    norm = np.hypot(jx, jy)
    safe = np.where(norm > 0.0, norm, 1.0)
    return VectorFieldGrid(v.geometry, jx / safe, jy / safe)


# ---------------------------------------------------------------------------
# Critical points


SADDLE = "saddle"
DEGENERATE = "degenerate"
EXTREMUM = "extremum"


@dataclass
class CriticalPoint:
    x: float
    y: float
    kind: str
    grad_norm: float
    hessian_det: float


@dataclass
class CriticalPointReport:
    points: list[CriticalPoint]
    grad_tol: float
    hess_tol: float

    def by_kind(self, kind: str) -> list[CriticalPoint]:
        return [pt for pt in self.points if pt.kind == kind]

    def to_dict(self) -> dict:
        return {
            "grad_tol": self.grad_tol,
            "hess_tol": self.hess_tol,
            "points": [
                {"x": pt.x, "y": pt.y, "kind": pt.kind,
                 "grad_norm": pt.grad_norm, "hessian_det": pt.hessian_det}
                for pt in self.points
            ],
        }


def _hessian_arrays(v: PotentialGrid) -> tuple[Array, Array, Array]:
    val = v.values
    h = v.geometry.spacing
    hxx = np.zeros_like(val)
    hyy = np.zeros_like(val)
    hxy = np.zeros_like(val)
    hxx[:, 1:-1] = (val[:, 2:] - 2.0 * val[:, 1:-1] + val[:, :-2]) / h ** 2
    hyy[1:-1, :] = (val[2:, :] - 2.0 * val[1:-1, :] + val[:-2, :]) / h ** 2
    hxy[1:-1, 1:-1] = (val[2:, 2:] - val[2:, :-2] - val[:-2, 2:] + val[:-2, :-2]) / (4.0 * h ** 2)
    # replicate nearest interior values on the boundary ring
    for arr in (hxx, hyy, hxy):
        arr[:, 0] = arr[:, 1]
        arr[:, -1] = arr[:, -2]
        arr[0, :] = arr[1, :]
        arr[-1, :] = arr[-2, :]
    return hxx, hyy, hxy


def _bilinear_zeros(cx: Array, cy: Array, max_depth: int = 60) -> list[tuple[float, float]]:
    """Zeros of a pair of bilinear patch functions given their 2x2 corner values.

    A bilinear function attains its patch extrema at the corners, so the
    corner sign test is an exact containment test; recursive quadrisection
    converges onto every common zero.
    """

    def interp(c, u, w):
        return ((1 - u) * (1 - w) * c[0, 0] + u * (1 - w) * c[0, 1]
                + (1 - u) * w * c[1, 0] + u * w * c[1, 1])

    def straddles(vals):
        return min(vals) <= 0.0 <= max(vals)

    boxes = [(0.0, 1.0, 0.0, 1.0, 0)]
    zeros: list[tuple[float, float]] = []
    budget = 20000
    while boxes and budget > 0:
        budget -= 1
        u0, u1, w0, w1, depth = boxes.pop()
        corners = [(u0, w0), (u1, w0), (u0, w1), (u1, w1)]
        xs = [interp(cx, u, w) for u, w in corners]
        ys = [interp(cy, u, w) for u, w in corners]
        if not (straddles(xs) and straddles(ys)):
            continue
        if depth >= max_depth:
            zeros.append((0.5 * (u0 + u1), 0.5 * (w0 + w1)))
            continue
        um, wm = 0.5 * (u0 + u1), 0.5 * (w0 + w1)
        boxes.extend([
            (u0, um, w0, wm, depth + 1),
            (um, u1, w0, wm, depth + 1),
            (u0, um, wm, w1, depth + 1),
            (um, u1, wm, w1, depth + 1),
        ])
    # merge duplicates found through shared sub-box edges
    merged: list[tuple[float, float]] = []
    for z in zeros:
        if all((z[0] - m[0]) ** 2 + (z[1] - m[1]) ** 2 > 1e-18 for m in merged):
            merged.append(z)
    return merged


def detect_critical_points(v: PotentialGrid,
                           grad_tol: float | None = None,
                           hess_tol: float | None = None) -> CriticalPointReport:
    """Locate and classify interior zeros of the interpolated gradient field.

    Scans every 2x2 patch of free cells whose corner gradient components
    straddle zero in both directions, refines each candidate to the patch
    interpolant's zero, and classifies it by the sign of the interpolated
    finite-difference Hessian determinant.  Patches touching pinned cells
    are excluded: the pins are genuine boundary extrema of the field.
    Tolerances default to scale-relative values so the scan survives the
    flatness of the potential far from the pins.
    """
    geom = v.geometry
    # scan the same field the streamline integrator follows; its zeros
    # coincide with those of grad(V) since the two are pointwise parallel
    gx, gy = v.flow_field()
    gnorm_max = float(np.hypot(gx, gy).max())
    if grad_tol is None:
        grad_tol = 1.0e-8 * gnorm_max
    hxx, hyy, hxy = _hessian_arrays(v)
    hmax = max(float(np.abs(hxx).max()), float(np.abs(hyy).max()), float(np.abs(hxy).max()))
    if hess_tol is None:
        hess_tol = 1.0e-12 * hmax

    # only patches whose four corner cells are free AND strictly interior:
    # outer-ring cells carry one-sided gradients, and the domain's own
    # boundary critical points (box corners, wall stagnation) belong to the
    # boundary, not to this interior scan
    free = v.free_mask.copy()
    free[0, :] = free[-1, :] = False
    free[:, 0] = free[:, -1] = False
    f00 = free[:-1, :-1] & free[:-1, 1:] & free[1:, :-1] & free[1:, 1:]

    def corner_stack(a):
        return np.stack([a[:-1, :-1], a[:-1, 1:], a[1:, :-1], a[1:, 1:]])

    sx = corner_stack(gx)
    sy = corner_stack(gy)
    cand = (f00
            & (sx.min(axis=0) <= 0.0) & (sx.max(axis=0) >= 0.0)
            & (sy.min(axis=0) <= 0.0) & (sy.max(axis=0) >= 0.0))

    h = geom.spacing
    points: list[CriticalPoint] = []
    for j, i in zip(*np.nonzero(cand)):
        cx = gx[j:j + 2, i:i + 2]
        cy = gy[j:j + 2, i:i + 2]
        for (u, w) in _bilinear_zeros(cx, cy):
            x = (i + 0.5 + u) * h
            y = (j + 0.5 + w) * h
            ax = bilinear_at(gx, geom, x, y)
            ay = bilinear_at(gy, geom, x, y)
            gn = math.hypot(ax, ay)
            if gn >= grad_tol:
                continue
            det = (bilinear_at(hxx, geom, x, y) * bilinear_at(hyy, geom, x, y)
                   - bilinear_at(hxy, geom, x, y) ** 2)
            if det < -hess_tol:
                kind = SADDLE
            elif det > hess_tol:
                kind = EXTREMUM
            else:
                kind = DEGENERATE
            points.append(CriticalPoint(x=x, y=y, kind=kind, grad_norm=gn, hessian_det=det))

    # dedupe zeros shared by adjacent patches
    unique: list[CriticalPoint] = []
    for pt in points:
        if all((pt.x - q.x) ** 2 + (pt.y - q.y) ** 2 > (1e-9 * h) ** 2 for q in unique):
            unique.append(pt)
    return CriticalPointReport(points=unique, grad_tol=grad_tol, hess_tol=hess_tol)

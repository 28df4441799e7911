"""Executable verification suite: runs the planner's behavioral guarantees
as concrete checks over a directory of fixture configs.

Checks per fixture:
  * solver_converged      -- the solve reaches its residual tolerance;
  * max_principle         -- no free cell is a strict local extremum;
  * value_range           -- converged values in [0,1]; max only at the start
                             pin, min only at the target pin;
  * zero_p_avoidance      -- no trajectory sample lands in a zero cell;
  * goal_convergence      -- streamlines from n random admissible seeds all
                             reach the target;
  * morse_saddles         -- the critical-point scan finds saddles or nothing;
  * energy_minimality     -- the converged field has strictly lower energy
                             than every random pin-preserving perturbation;
  * risk_ratio            -- path risk is within the configured factor of the
                             Dijkstra min-risk oracle;
  * high_risk_arc         -- (optional) bounded arc-length fraction in the
                             worst-risk cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fixtures import build_map, endpoints_from, load_fixture_config
from .grid import Endpoints, ProbabilityGrid
from .oracle import dijkstra_min_risk
from .policy import (
    EXTREMUM,
    DEGENERATE,
    REACHED_TARGET,
    StreamlineParams,
    detect_critical_points,
    integrate_streamline,
    path_risk,
)
from .solver import PotentialGrid, SolverConfig, dirichlet_energy, sor_solve

Array = np.ndarray


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class FixtureReport:
    name: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def strict_extrema_count(v: PotentialGrid) -> int:
    """Free cells strictly above or below all in-grid stencil neighbors."""
    val = v.values
    h, w = val.shape
    vp = np.full((h + 2, w + 2), np.nan)
    vp[1:-1, 1:-1] = val
    stacks = np.stack([vp[1:-1, :-2], vp[1:-1, 2:], vp[:-2, 1:-1], vp[2:, 1:-1]])
    nmin = np.nanmin(stacks, axis=0)
    nmax = np.nanmax(stacks, axis=0)
    free = v.free_mask
    strict_max = (val > nmax) & free
    strict_min = (val < nmin) & free
    return int(strict_max.sum() + strict_min.sum())


def random_admissible_seeds(p: ProbabilityGrid, n: int, seed: int) -> list[tuple[float, float]]:
    """Uniformly random continuous seeds, one per randomly chosen admissible
    interior cell, clamped to the interpolation hull."""
    rng = np.random.default_rng(seed)
    admissible = ~p.zero_mask
    admissible[0, :] = admissible[-1, :] = False
    admissible[:, 0] = admissible[:, -1] = False
    cells = np.argwhere(admissible)
    if len(cells) == 0:
        return []
    idx = rng.integers(0, len(cells), size=n)
    h = p.geometry.spacing
    out = []
    for k in idx:
        jy, jx = cells[k]
        x = (jx + rng.random()) * h
        y = (jy + rng.random()) * h
        out.append(p.geometry.clamp_to_hull(x, y))
    return out


def sample_cells_in_zero_set(p: ProbabilityGrid, points: Array) -> int:
    count = 0
    for x, y in points:
        ix, iy = p.geometry.cell_of(x, y)
        if p.zero_mask[iy, ix]:
            count += 1
    return count


def perturbed_energies(p: ProbabilityGrid, v: PotentialGrid, n: int, amplitude: float,
                       seed: int, floor: float | None = None) -> list[float]:
    rng = np.random.default_rng(seed)
    free = v.free_mask
    out = []
    for _ in range(n):
        noise = rng.uniform(-amplitude, amplitude, size=v.values.shape)
        perturbed = v.values + np.where(free, noise, 0.0)
        vp = PotentialGrid(v.geometry, perturbed, v.pinned)
        out.append(dirichlet_energy(p, vp, floor))
    return out


def high_risk_arc_fraction(p: ProbabilityGrid, traj, percentile: float = 95.0) -> float:
    """Arc-length fraction spent in cells whose risk (1/P) exceeds the given
    percentile of the map's risk distribution."""
    with np.errstate(divide="ignore"):
        risk = 1.0 / np.where(p.zero_mask, np.nan, p.values)
    threshold = float(np.nanpercentile(risk, percentile))
    frac_len = 0.0
    for (x, y), ds in zip(traj.points, traj.ds):
        ix, iy = p.geometry.cell_of(x, y)
        cell_risk = risk[iy, ix]
        if np.isnan(cell_risk) or cell_risk > threshold:
            frac_len += ds
    total = traj.length
    return frac_len / total if total > 0.0 else 0.0


def verify_fixture(cfg: dict, solver_overrides: dict | None = None) -> FixtureReport:
    """Run all checks for one fixture config."""
    name = cfg["name"]
    report = FixtureReport(name=name)
    p = build_map(cfg["map"])
    endpoints = endpoints_from(cfg)
    solver_kwargs = dict(cfg.get("solver", {}))
    if solver_overrides:
        solver_kwargs.update(solver_overrides)
    scfg = SolverConfig(**solver_kwargs)
    params = StreamlineParams(**cfg.get("path", {}))
    n_seeds = int(cfg.get("n_seeds", 100))
    rng_seed = int(cfg.get("seed", 0))

    v, solve_report = sor_solve(p, endpoints, scfg)
    report.checks.append(CheckResult(
        "solver_converged", solve_report.converged,
        f"iterations={solve_report.iterations} residual={solve_report.final_residual:.3e}"))

    n_extrema = strict_extrema_count(v)
    report.checks.append(CheckResult(
        "max_principle", n_extrema == 0, f"strict local extrema: {n_extrema}"))

    pad = 10.0 * scfg.tol
    in_range = bool((v.values >= -pad).all() and (v.values <= 1.0 + pad).all())
    jmax = np.unravel_index(np.argmax(v.values), v.values.shape)
    jmin = np.unravel_index(np.argmin(v.values), v.values.shape)
    extremes_pinned = bool(v.pinned[jmax] and v.pinned[jmin]) if scfg.pin_start else True
    report.checks.append(CheckResult(
        "value_range", in_range and extremes_pinned,
        f"range=[{v.values.min():.3e}, {v.values.max():.3e}] extremes_at_pins={extremes_pinned}"))

    seeds = random_admissible_seeds(p, n_seeds, rng_seed)
    n_reached = 0
    n_zero_hits = 0
    for s in seeds:
        traj = integrate_streamline(v, p, s, params)
        if traj.status == REACHED_TARGET:
            n_reached += 1
        n_zero_hits += sample_cells_in_zero_set(p, traj.points)
    report.checks.append(CheckResult(
        "zero_p_avoidance", n_zero_hits == 0,
        f"samples in zero-probability cells: {n_zero_hits}"))
    report.checks.append(CheckResult(
        "goal_convergence", n_reached == len(seeds),
        f"reached target: {n_reached}/{len(seeds)}"))

    scan = detect_critical_points(v)
    n_bad = len(scan.by_kind(EXTREMUM)) + len(scan.by_kind(DEGENERATE))
    report.checks.append(CheckResult(
        "morse_saddles", n_bad == 0,
        f"saddles={len(scan.by_kind('saddle'))} extrema={len(scan.by_kind(EXTREMUM))} "
        f"degenerate={len(scan.by_kind(DEGENERATE))}"))

    energy0 = dirichlet_energy(p, v, scfg.epsilon_floor)
    energies = perturbed_energies(p, v, 100, 1.0e-3, rng_seed + 1, scfg.epsilon_floor)
    n_lower = sum(1 for e in energies if energy0 < e)
    report.checks.append(CheckResult(
        "energy_minimality", n_lower == len(energies),
        f"converged energy lower in {n_lower}/{len(energies)} trials"))

    traj = integrate_streamline(v, p, endpoints.start, params)
    bound = cfg.get("risk_ratio_bound", 1.5)
    if traj.status == REACHED_TARGET:
        oracle = dijkstra_min_risk(p, endpoints)
        ratio = path_risk(traj, floor=p.floor) / oracle.total_risk
        if bound is None:
            # recorded for the report; no bound configured for this map
            report.checks.append(CheckResult(
                "risk_ratio", True, f"ghpf/oracle risk ratio: {ratio:.4f} (recorded, no bound)"))
        else:
            report.checks.append(CheckResult(
                "risk_ratio", ratio <= float(bound),
                f"ghpf/oracle risk ratio: {ratio:.4f} (bound {bound})"))
    else:
        report.checks.append(CheckResult(
            "risk_ratio", False, f"start trajectory did not reach target ({traj.status})"))

    arc_bound = cfg.get("high_risk_arc_bound")
    if arc_bound is not None:
        frac = high_risk_arc_fraction(p, traj)
        report.checks.append(CheckResult(
            "high_risk_arc", frac < float(arc_bound),
            f"arc fraction above 95th-percentile risk: {frac:.4f} (bound {arc_bound})"))

    return report


def run_verification(fixture_dir: str | Path,
                     solver_overrides: dict | None = None) -> dict:
    """Verify every fixture config in the directory (sorted order).

    Returns the report dict; raises FileNotFoundError when the directory is
    missing or holds no fixture configs.
    """
    fixture_dir = Path(fixture_dir)
    if not fixture_dir.is_dir():
        raise FileNotFoundError(f"fixture directory {fixture_dir} does not exist")
    paths = sorted(fixture_dir.glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no fixture configs (*.json) in {fixture_dir}")
    fixtures = [verify_fixture(load_fixture_config(p), solver_overrides) for p in paths]
    return {
        "schema_version": 1,
        "fixtures": [f.to_dict() for f in fixtures],
        "all_passed": all(f.passed for f in fixtures),
    }


def format_report_text(report: dict) -> str:
    lines = []
    for fx in report["fixtures"]:
        for chk in fx["checks"]:
            mark = "PASS" if chk["passed"] else "FAIL"
            lines.append(f"{mark}  {fx['name']:24s} {chk['name']:18s} {chk['detail']}")
        lines.append(("PASS" if fx["passed"] else "FAIL") + f"  {fx['name']:24s} (fixture overall)")
    lines.append("ALL PASSED" if report["all_passed"] else "FAILURES PRESENT")
    return "\n".join(lines) + "\n"

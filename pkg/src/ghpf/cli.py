"""Command-line front end: plan, drift-plan, compare, verify, gen-map, gen-drift.

Every run folds its effective parameters (defaults <- config file <- explicit
flags) into a single dict, writes it to <out-dir>/config.json, and derives all
artifacts deterministically from it: replaying a saved config reproduces the
artifact bodies byte for byte.  Wall-clock measurements never enter artifact
bodies for the same reason.

Exit codes: 0 success; 2 map/fixture errors; 3 solver non-convergence;
4 unreachable target or stalled trajectory; 5 parameter errors;
6 drift outer-loop non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import fixtures as fx
from .drift import DriftConfig, accumulated_utility, correlated_noise_field, solve_drift_bvp, vortex_field
from .errors import (
    DegenerateMapError,
    GhpfError,
    MapFormatError,
    ParameterError,
    UnreachableError,
)
from .grid import Endpoints, GridGeometry, ProbabilityGrid, binary_quantize, make_white_noise_map
from .mapio import (
    load_probability_map,
    load_vector_field,
    load_vector_field_interleaved,
    save_vector_field,
    save_vector_field_interleaved,
    write_array_csv,
    write_pgm16,
)
from .oracle import compare_paths, dijkstra_min_risk
from .policy import (
    REACHED_TARGET,
    StreamlineParams,
    harvesting_fraction,
    heading_drift_differential,
    integrate_streamline,
    path_risk,
    policy_vectors,
)
from .solver import SolverConfig, sor_solve
from .verify import format_report_text, run_verification

EXIT_OK = 0
EXIT_MAP = 2
EXIT_NONCONVERGED = 3
EXIT_UNREACHABLE = 4
EXIT_PARAMETER = 5
EXIT_OUTER_LOOP = 6

SCHEMA_VERSION = 1

_FLOAT_FMT = "%.17g"


def _fmt(v) -> str:
    return _FLOAT_FMT % v


def _config_artifact(command: str, cfg: dict) -> dict:
    # the artifact directory is where a run lands, not part of what it was;
    # leaving it out keeps replayed configs byte-identical across locations
    body = {k: v for k, v in cfg.items() if k != "out_dir"}
    return {"command": command, **body}


def _write_json(obj: dict, path: Path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(cfg: dict) -> Path:
    out = cfg.get("out_dir") or os.environ.get("GHPF_OUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_xy(text: str) -> list[float]:
    try:
        parts = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ParameterError(f"expected 'x,y', got {text!r}") from exc
    if len(parts) != 2:
        raise ParameterError(f"expected 'x,y', got {text!r}")
    return parts


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ParameterError(f"expected 'WxH', got {text!r}") from exc


def _merge_config(defaults: dict, args: argparse.Namespace, keys: list[str]) -> dict:
    cfg = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, "r", encoding="ascii") as fh:
            loaded = json.load(fh)
        for k, v in loaded.items():
            if k in cfg:
                cfg[k] = v
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(
        omega=float(cfg["omega"]),
        tol=float(cfg["tol"]),
        max_iters=cfg["max_iters"] if cfg["max_iters"] is None else int(cfg["max_iters"]),
        epsilon_floor=float(cfg["epsilon"]),
        pin_start=not bool(cfg.get("no_pin_start", False)),
    )


def _stream_params(cfg: dict) -> StreamlineParams:
    return StreamlineParams(
        step_size=float(cfg["step_size"]),
        capture_radius=float(cfg["capture_radius"]),
        max_steps=cfg["max_steps"] if cfg["max_steps"] is None else int(cfg["max_steps"]),
    )


def _endpoints(cfg: dict) -> Endpoints:
    if cfg.get("start") is None or cfg.get("target") is None:
        raise ParameterError("both --start and --target are required")
    start = cfg["start"] if isinstance(cfg["start"], (list, tuple)) else _parse_xy(cfg["start"])
    target = cfg["target"] if isinstance(cfg["target"], (list, tuple)) else _parse_xy(cfg["target"])
    return Endpoints(start=tuple(start), target=tuple(target))


def _write_trajectory_csv(traj, path: Path, drift_diff=None) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("x,y,p,grad_norm,ds,drift_diff\n")
        for k in range(traj.n_samples):
            x, y = traj.points[k]
            diff = ""
            if drift_diff is not None and not math.isnan(drift_diff[k]):
                diff = _fmt(drift_diff[k])
            fh.write(",".join([_fmt(x), _fmt(y), _fmt(traj.p_values[k]),
                               _fmt(traj.grad_norms[k]), _fmt(traj.ds[k]), diff]))
            fh.write("\n")


def _write_policy_csv(v, path: Path) -> None:
    pol = policy_vectors(v)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("cell_x,cell_y,ux,uy\n")
        for iy in range(v.geometry.height):
            for ix in range(v.geometry.width):
                fh.write(f"{ix},{iy},{_fmt(pol.vx[iy, ix])},{_fmt(pol.vy[iy, ix])}\n")


def _write_oracle_csv(oracle, path: Path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("cell_x,cell_y\n")
        for ix, iy in oracle.cells:
            fh.write(f"{ix},{iy}\n")


def _load_map(cfg: dict) -> ProbabilityGrid:
    if not cfg.get("map"):
        raise ParameterError("--map is required")
    return load_probability_map(cfg["map"], cfg.get("format"),
                                spacing=float(cfg["spacing"]),
                                floor=float(cfg["epsilon"]))


# ---------------------------------------------------------------------------
# plan


_PLAN_DEFAULTS = {
    "map": None, "format": None, "start": None, "target": None,
    "spacing": 1.0, "epsilon": 1.0e-6,
    "omega": 1.9, "tol": 1.0e-8, "max_iters": None, "no_pin_start": False,
    "step_size": 0.25, "capture_radius": 1.0, "max_steps": None,
    "out_dir": None,
}


def cmd_plan(args: argparse.Namespace) -> int:
    cfg = _merge_config(_PLAN_DEFAULTS, args, list(_PLAN_DEFAULTS))
    out = _out_dir(cfg)
    p = _load_map(cfg)
    endpoints = _endpoints(cfg)
    scfg = _solver_config(cfg)
    params = _stream_params(cfg)

    v, report = sor_solve(p, endpoints, scfg)
    traj = integrate_streamline(v, p, endpoints.start, params)

    write_array_csv(v.values, out / "potential.csv")
    write_pgm16(v.values, out / "potential.pgm")
    _write_policy_csv(v, out / "policy.csv")
    _write_trajectory_csv(traj, out / "trajectory.csv")
    _write_json({
        "schema_version": SCHEMA_VERSION,
        "solver": report.to_dict(),
        "trajectory": {
            "status": traj.status,
            "n_samples": traj.n_samples,
            "length": traj.length,
            "risk": path_risk(traj, floor=p.floor),
        },
    }, out / "report.json")
    _write_json(_config_artifact("plan", cfg), out / "config.json")

    if not report.converged:
        print(f"solver did not converge: residual {report.final_residual:.3e}", file=sys.stderr)
        return EXIT_NONCONVERGED
    if traj.status != REACHED_TARGET:
        print(f"trajectory did not reach the target: {traj.status}", file=sys.stderr)
        return EXIT_UNREACHABLE
    return EXIT_OK


# ---------------------------------------------------------------------------
# drift-plan


_DRIFT_DEFAULTS = {
    **_PLAN_DEFAULTS,
    "box": None, "obstacle": "none",
    "vortex": None, "vortex_center": None, "vortex_strength": 1.0,
    "noise_drift_seed": None, "correlation_length": 4,
    "drift_vx": None, "drift_vy": None, "drift_interleaved": None,
    "k": 1.0, "alpha": 0.5, "outer_tol": 1.0e-3, "outer_max_iters": 50,
}


def _build_obstacles(cfg: dict) -> ProbabilityGrid:
    if cfg.get("map"):
        return _load_map(cfg)
    if not cfg.get("box"):
        raise ParameterError("provide --map or --box WxH for the workspace")
    w, h = _parse_size(cfg["box"]) if isinstance(cfg["box"], str) else cfg["box"]
    floor = float(cfg["epsilon"])
    if cfg.get("obstacle", "none") == "center":
        return fx.central_block_map(w, h, spacing=float(cfg["spacing"]), floor=floor)
    return fx.ones_map(w, h, spacing=float(cfg["spacing"]), floor=floor)


def _build_drift(cfg: dict, geom: GridGeometry):
    if cfg.get("drift_vx") and cfg.get("drift_vy"):
        return load_vector_field(cfg["drift_vx"], cfg["drift_vy"], spacing=geom.spacing)
    if cfg.get("drift_interleaved"):
        return load_vector_field_interleaved(cfg["drift_interleaved"], spacing=geom.spacing)
    if cfg.get("vortex"):
        if cfg["vortex"] not in ("ccw", "cw"):
            raise ParameterError(f"--vortex must be ccw or cw, got {cfg['vortex']!r}")
        center = cfg.get("vortex_center")
        if center is None:
            xmax, ymax = geom.extent
            center = (0.5 * xmax, 0.5 * ymax)
        elif isinstance(center, str):
            center = tuple(_parse_xy(center))
        else:
            center = tuple(center)
        return vortex_field(geom, center, float(cfg["vortex_strength"]),
                            ccw=cfg["vortex"] == "ccw")
    if cfg.get("noise_drift_seed") is not None:
        return correlated_noise_field(geom, int(cfg["noise_drift_seed"]),
                                      int(cfg["correlation_length"]))
    raise ParameterError("no drift source: pass --vortex, --noise-drift-seed, or drift files")


def cmd_drift_plan(args: argparse.Namespace) -> int:
    cfg = _merge_config(_DRIFT_DEFAULTS, args, list(_DRIFT_DEFAULTS))
    out = _out_dir(cfg)
    obstacles = _build_obstacles(cfg)
    psi = _build_drift(cfg, obstacles.geometry)
    endpoints = _endpoints(cfg)
    scfg = _solver_config(cfg)
    params = _stream_params(cfg)
    dcfg = DriftConfig(k=float(cfg["k"]), alpha=float(cfg["alpha"]),
                       outer_tol=float(cfg["outer_tol"]),
                       outer_max_iters=int(cfg["outer_max_iters"]))

    sol = solve_drift_bvp(psi, obstacles, endpoints, dcfg, scfg)
    traj = integrate_streamline(sol.potential, sol.descriptor, endpoints.start, params)
    diff = heading_drift_differential(traj, psi)
    frac = harvesting_fraction(diff)
    zero_drift = bool((psi.vx == 0.0).all() and (psi.vy == 0.0).all())

    write_array_csv(sol.descriptor.values, out / "descriptor.csv")
    write_array_csv(sol.potential.values, out / "potential.csv")
    _write_trajectory_csv(traj, out / "trajectory.csv", drift_diff=diff)
    with open(out / "heading_diff.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("x,y,drift_diff\n")
        for (x, y), d in zip(traj.points, diff):
            fh.write(f"{_fmt(x)},{_fmt(y)},{'' if math.isnan(d) else _fmt(d)}\n")
    _write_json({"schema_version": SCHEMA_VERSION, "trace": sol.trace},
                out / "outer_trace.json")
    _write_json({
        "schema_version": SCHEMA_VERSION,
        "status": traj.status,
        "reached_target": traj.status == REACHED_TARGET,
        "harvesting_fraction": None if math.isnan(frac) else frac,
        "accumulated_utility": accumulated_utility(traj, psi, sol.potential, dcfg.k),
        "outer_iterations": sol.outer_iterations,
        "outer_converged": sol.outer_converged,
        "neutral_reduction": zero_drift,
        "trajectory_length": traj.length,
    }, out / "summary.json")
    _write_json(_config_artifact("drift-plan", cfg), out / "config.json")

    if not sol.outer_converged:
        print(f"outer loop hit its cap ({sol.outer_iterations} iterations)", file=sys.stderr)
        return EXIT_OUTER_LOOP
    if not sol.report.converged:
        print("inner solver did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    if traj.status != REACHED_TARGET:
        print(f"trajectory did not reach the target: {traj.status}", file=sys.stderr)
        return EXIT_UNREACHABLE
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _merge_config(_PLAN_DEFAULTS, args, list(_PLAN_DEFAULTS))
    out = _out_dir(cfg)
    p = _load_map(cfg)
    endpoints = _endpoints(cfg)
    scfg = _solver_config(cfg)
    params = _stream_params(cfg)

    oracle = dijkstra_min_risk(p, endpoints)
    v, report = sor_solve(p, endpoints, scfg)
    traj = integrate_streamline(v, p, endpoints.start, params)
    record = compare_paths(traj, oracle, p)

    _write_trajectory_csv(traj, out / "ghpf_trajectory.csv")
    _write_oracle_csv(oracle, out / "oracle_path.csv")
    _write_json({"schema_version": SCHEMA_VERSION,
                 "n_cells": oracle.n_cells,
                 "total_risk": oracle.total_risk}, out / "oracle_summary.json")
    _write_json({"schema_version": SCHEMA_VERSION,
                 "solver": report.to_dict(),
                 "trajectory_status": traj.status,
                 **record.to_dict()}, out / "comparison.json")
    _write_json(_config_artifact("compare", cfg), out / "config.json")

    if not report.converged:
        print("solver did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    if traj.status != REACHED_TARGET:
        print(f"trajectory did not reach the target: {traj.status}", file=sys.stderr)
        return EXIT_UNREACHABLE
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


_VERIFY_DEFAULTS = {"fixtures": "fixtures", "out_dir": None, "tol": None, "max_iters": None,
                    "omega": None}


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _merge_config(_VERIFY_DEFAULTS, args, list(_VERIFY_DEFAULTS))
    out = _out_dir(cfg)
    overrides = {k: cfg[k] for k in ("tol", "max_iters", "omega") if cfg.get(k) is not None}
    report = run_verification(cfg["fixtures"], solver_overrides=overrides or None)
    text = format_report_text(report)
    _write_json(report, out / "verify_report.json")
    with open(out / "verify_report.txt", "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK if report["all_passed"] else 1


# ---------------------------------------------------------------------------
# generators


def cmd_gen_map(args: argparse.Namespace) -> int:
    w, h = _parse_size(args.size)
    geom = GridGeometry(w, h)
    if args.kind == "noise":
        grid = make_white_noise_map(geom, int(args.seed))
    elif args.kind == "binary-u":
        grid = fx.binary_u_map(w, h)
    elif args.kind == "multimodal":
        grid = fx.multimodal_map(w, h)
    elif args.kind == "empty":
        grid = fx.ones_map(w, h)
    else:
        raise ParameterError(f"unknown map kind {args.kind!r}")
    if args.quantize is not None:
        grid = binary_quantize(grid, float(args.quantize))
    out = Path(args.out)
    if out.suffix.lower() == ".pgm":
        write_pgm16(grid.values, out)
    else:
        write_array_csv(grid.values, out)
    return EXIT_OK


def cmd_gen_drift(args: argparse.Namespace) -> int:
    w, h = _parse_size(args.size)
    geom = GridGeometry(w, h)
    if args.kind == "vortex":
        center = tuple(_parse_xy(args.center)) if args.center else (0.5 * w, 0.5 * h)
        field = vortex_field(geom, center, float(args.strength), ccw=args.rotation == "ccw")
    elif args.kind == "correlated":
        field = correlated_noise_field(geom, int(args.seed), int(args.correlation_length))
    else:
        raise ParameterError(f"unknown drift kind {args.kind!r}")
    if args.out_interleaved:
        save_vector_field_interleaved(field, args.out_interleaved)
    else:
        if not (args.out_vx and args.out_vy):
            raise ParameterError("pass --out-vx and --out-vy, or --out-interleaved")
        save_vector_field(field, args.out_vx, args.out_vy)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common_plan_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--map", help="probability map file (.pgm or .csv)")
    sp.add_argument("--format", choices=["pgm", "csv"], help="override format detection")
    sp.add_argument("--start", help="start point 'x,y'")
    sp.add_argument("--target", help="target point 'x,y'")
    sp.add_argument("--spacing", type=float, help="cell spacing (default 1.0)")
    sp.add_argument("--epsilon", type=float, help="probability floor (default 1e-6)")
    sp.add_argument("--omega", type=float, help="SOR relaxation factor (default 1.9)")
    sp.add_argument("--tol", type=float, help="residual tolerance (default 1e-8)")
    sp.add_argument("--max-iters", dest="max_iters", type=int, help="iteration cap")
    sp.add_argument("--no-pin-start", dest="no_pin_start", action="store_const", const=True,
                    help="solve with the target-only Dirichlet condition")
    sp.add_argument("--step-size", dest="step_size", type=float,
                    help="streamline step in cells (default 0.25)")
    sp.add_argument("--capture-radius", dest="capture_radius", type=float,
                    help="capture radius in cells (default 1.0)")
    sp.add_argument("--max-steps", dest="max_steps", type=int, help="streamline step cap")
    sp.add_argument("--out-dir", dest="out_dir", help="artifact directory (or $GHPF_OUT_DIR)")
    sp.add_argument("--config", help="JSON config file; explicit flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghpf",
        description="Gamma-harmonic potential field planner for probabilistic grid maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="solve a map and trace the policy streamline")
    _add_common_plan_flags(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("drift-plan", help="drift-sensitive planning run")
    _add_common_plan_flags(sp)
    sp.add_argument("--box", help="empty workspace size 'WxH' (alternative to --map)")
    sp.add_argument("--obstacle", choices=["none", "center"],
                    help="canned obstacle for --box workspaces")
    sp.add_argument("--vortex", choices=["ccw", "cw"], help="vortex drift rotation")
    sp.add_argument("--vortex-center", dest="vortex_center", help="vortex center 'x,y'")
    sp.add_argument("--vortex-strength", dest="vortex_strength", type=float)
    sp.add_argument("--noise-drift-seed", dest="noise_drift_seed", type=int,
                    help="seed for correlated random drift")
    sp.add_argument("--correlation-length", dest="correlation_length", type=int)
    sp.add_argument("--drift-vx", dest="drift_vx", help="vx component CSV")
    sp.add_argument("--drift-vy", dest="drift_vy", help="vy component CSV")
    sp.add_argument("--drift-interleaved", dest="drift_interleaved",
                    help="interleaved (vx, vy) CSV")
    sp.add_argument("--k", type=float, help="drift cost ceiling (default 1.0)")
    sp.add_argument("--alpha", type=float, help="outer-loop mixing (default 0.5)")
    sp.add_argument("--outer-tol", dest="outer_tol", type=float)
    sp.add_argument("--outer-max-iters", dest="outer_max_iters", type=int)
    sp.set_defaults(func=cmd_drift_plan)

    sp = sub.add_parser("compare", help="plan and compare against the min-risk oracle")
    _add_common_plan_flags(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("verify", help="run the verification suite over fixtures")
    sp.add_argument("--fixtures", help="fixture config directory (default ./fixtures)")
    sp.add_argument("--tol", type=float, help="override fixture solver tolerance")
    sp.add_argument("--max-iters", dest="max_iters", type=int,
                    help="override fixture solver iteration cap")
    sp.add_argument("--omega", type=float, help="override fixture SOR factor")
    sp.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    sp.add_argument("--config", help="JSON config file")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("gen-map", help="generate a fixture map")
    sp.add_argument("--kind", required=True, choices=["noise", "binary-u", "multimodal", "empty"])
    sp.add_argument("--size", required=True, help="'WxH'")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--quantize", type=float, help="binary-quantize at this threshold")
    sp.add_argument("--out", required=True, help="output file (.csv or .pgm)")
    sp.set_defaults(func=cmd_gen_map)

    sp = sub.add_parser("gen-drift", help="generate a drift field")
    sp.add_argument("--kind", required=True, choices=["vortex", "correlated"])
    sp.add_argument("--size", required=True, help="'WxH'")
    sp.add_argument("--center", help="vortex center 'x,y' (default grid center)")
    sp.add_argument("--strength", type=float, default=1.0)
    sp.add_argument("--rotation", choices=["ccw", "cw"], default="ccw")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--correlation-length", dest="correlation_length", type=int, default=4)
    sp.add_argument("--out-vx", dest="out_vx")
    sp.add_argument("--out-vy", dest="out_vy")
    sp.add_argument("--out-interleaved", dest="out_interleaved")
    sp.set_defaults(func=cmd_gen_drift)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MapFormatError, DegenerateMapError, FileNotFoundError) as exc:
        print(f"map error: {exc}", file=sys.stderr)
        return EXIT_MAP
    except UnreachableError as exc:
        print(f"unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except GhpfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER


if __name__ == "__main__":
    sys.exit(main())

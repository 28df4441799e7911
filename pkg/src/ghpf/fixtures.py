"""Canonical test scenes: map builders and the shipped verification fixtures.

Each fixture is a small JSON config naming a deterministic map generator
and the run endpoints, so no bulky map files need to ship with the repo;
``ghpf verify`` rebuilds the maps bit-identically from the specs.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import MapFormatError, ParameterError
from .grid import DEFAULT_FLOOR, Endpoints, GridGeometry, ProbabilityGrid, make_white_noise_map

Array = np.ndarray


def ones_map(width: int, height: int, spacing: float = 1.0,
             floor: float = DEFAULT_FLOOR) -> ProbabilityGrid:
    geom = GridGeometry(width, height, spacing)
    return ProbabilityGrid(geom, np.ones(geom.shape), floor=floor)


def binary_u_map(width: int = 128, height: int = 128, spacing: float = 1.0,
                 floor: float = DEFAULT_FLOOR) -> ProbabilityGrid:
    """Binary map with a U-shaped zero region whose closed side faces low x.

    The mouth opens toward high x (the target side in the canonical
    fixture), so the shielded pocket drains out of its mouth: the potential
    inside the pocket sits above the mouth's exterior values and streamlines
    seeded there leave through the opening instead of riding the floored
    leak current through a wall.  Proportions follow the 128x128 layout.
    """
    geom = GridGeometry(width, height, spacing)
    v = np.ones(geom.shape)

    def scaled(lo, hi, n):
        return slice(int(lo * n / 128), int(hi * n / 128))

    xs = scaled(36, 84, width)
    v[scaled(40, 48, height), xs] = 0.0    # top arm
    v[scaled(80, 88, height), xs] = 0.0    # bottom arm
    v[scaled(40, 88, height), scaled(36, 44, width)] = 0.0  # closed side
    return ProbabilityGrid(geom, v, floor=floor)


_MULTIMODAL_BUMPS = (
    # (cx, cy, sx, sy, amplitude) in units of a 96-cell grid
    (20.0, 24.0, 9.0, 9.0, 0.90),
    (52.0, 16.0, 7.0, 10.0, 0.75),
    (78.0, 30.0, 10.0, 8.0, 0.85),
    (30.0, 62.0, 12.0, 9.0, 0.80),
    (64.0, 72.0, 9.0, 12.0, 0.95),
    (86.0, 86.0, 7.0, 7.0, 0.70),
)


def multimodal_map(width: int = 96, height: int = 96, spacing: float = 1.0,
                   floor: float = DEFAULT_FLOOR) -> ProbabilityGrid:
    """Smooth multi-bump suitability map with no zero cells."""
    geom = GridGeometry(width, height, spacing)
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    v = np.full(geom.shape, 0.12)
    for cx, cy, sx, sy, amp in _MULTIMODAL_BUMPS:
        cxs = cx * width / 96.0
        cys = cy * height / 96.0
        v += amp * np.exp(-((gx - cxs) ** 2 / (2 * sx ** 2) + (gy - cys) ** 2 / (2 * sy ** 2)))
    v /= v.max()
    return ProbabilityGrid(geom, v, floor=floor)


def central_block_map(width: int = 96, height: int = 96, block_frac: float = 1.0 / 6.0,
                      spacing: float = 1.0, floor: float = DEFAULT_FLOOR) -> ProbabilityGrid:
    """All-ones map with a square zero block in the middle (drift obstacle scene)."""
    geom = GridGeometry(width, height, spacing)
    v = np.ones(geom.shape)
    bw = max(1, int(round(width * block_frac)))
    bh = max(1, int(round(height * block_frac)))
    x0 = (width - bw) // 2
    y0 = (height - bh) // 2
    v[y0:y0 + bh, x0:x0 + bw] = 0.0
    return ProbabilityGrid(geom, v, floor=floor)


def build_map(spec: dict) -> ProbabilityGrid:
    """Build a map from a fixture spec dict: {'kind': ..., ...params}."""
    kind = spec.get("kind")
    width = int(spec.get("width", 64))
    height = int(spec.get("height", 64))
    spacing = float(spec.get("spacing", 1.0))
    floor = float(spec.get("floor", DEFAULT_FLOOR))
    if kind == "ones":
        return ones_map(width, height, spacing, floor)
    if kind == "binary_u":
        return binary_u_map(width, height, spacing, floor)
    if kind == "multimodal":
        return multimodal_map(width, height, spacing, floor)
    if kind == "white_noise":
        geom = GridGeometry(width, height, spacing)
        return make_white_noise_map(geom, int(spec["seed"]), floor=floor)
    if kind == "central_block":
        return central_block_map(width, height, float(spec.get("block_frac", 1.0 / 6.0)),
                                 spacing, floor)
    if kind == "file":
        from .mapio import load_probability_map
        return load_probability_map(spec["path"], spec.get("format"), spacing, floor)
    raise MapFormatError(f"unknown map kind {kind!r}")


def endpoints_from(cfg: dict) -> Endpoints:
    return Endpoints(start=tuple(cfg["start"]), target=tuple(cfg["target"]))


# ---------------------------------------------------------------------------
# Shipped fixtures


DEFAULT_FIXTURES: dict[str, dict] = {
    # endpoints deliberately break all mirror symmetries: exact symmetry
    # produces bitwise-tied neighbor values, and a tie plus leftover solver
    # defect can masquerade as a strict local extremum
    "empty_box_64": {
        "name": "empty_box_64",
        "map": {"kind": "ones", "width": 64, "height": 64},
        "start": [8.5, 10.5],
        "target": [54.5, 52.5],
        "seed": 1101,
        "n_seeds": 100,
        "risk_ratio_bound": 1.5,
    },
    "u_obstacle_128": {
        "name": "u_obstacle_128",
        "map": {"kind": "binary_u", "width": 128, "height": 128},
        "start": [16.5, 63.5],
        "target": [111.5, 63.5],
        "seed": 1102,
        "n_seeds": 100,
        "risk_ratio_bound": 1.5,
    },
    "multimodal_96": {
        "name": "multimodal_96",
        "map": {"kind": "multimodal", "width": 96, "height": 96},
        "start": [10.5, 10.5],
        "target": [85.5, 85.5],
        "seed": 1103,
        "n_seeds": 100,
        "risk_ratio_bound": 1.5,
    },
    # the oracle resolves single cells while the streamline follows the
    # smoothed conduction field, so on raw white noise the risk ratio is
    # recorded but not judged; the behavioral contract for this map is the
    # high-risk arc-length bound below
    "white_noise_128": {
        "name": "white_noise_128",
        "map": {"kind": "white_noise", "width": 128, "height": 128, "seed": 97531},
        "start": [10.5, 10.5],
        "target": [117.5, 117.5],
        "seed": 1104,
        "n_seeds": 100,
        "risk_ratio_bound": None,
        "high_risk_arc_bound": 0.05,
    },
}


DRIFT_SCENES: dict[str, dict] = {
    "vortex_ccw_96": {
        "name": "vortex_ccw_96",
        "obstacles": {"kind": "ones", "width": 96, "height": 96},
        "drift": {"kind": "vortex", "center": [48.0, 48.0], "strength": 2.0, "ccw": True},
        "start": [14.5, 48.5],
        "target": [81.5, 48.5],
        "harvesting_bound": 0.70,
    },
    "noise_drift_obstacle_96": {
        "name": "noise_drift_obstacle_96",
        "obstacles": {"kind": "central_block", "width": 96, "height": 96},
        "drift": {"kind": "correlated", "seed": 7, "correlation_length": 6},
        "start": [10.5, 48.5],
        "target": [85.5, 48.5],
        "harvesting_bound": 0.70,
    },
}


def build_drift_field(spec: dict, geometry: GridGeometry):
    from .drift import correlated_noise_field, vortex_field
    kind = spec.get("kind")
    if kind == "vortex":
        return vortex_field(geometry, tuple(spec["center"]), float(spec["strength"]),
                            bool(spec.get("ccw", True)))
    if kind == "correlated":
        return correlated_noise_field(geometry, int(spec["seed"]),
                                      int(spec["correlation_length"]))
    raise ParameterError(f"unknown drift kind {kind!r}")


def write_fixture_configs(directory: str | os.PathLike) -> list[Path]:
    """Materialize the canonical fixture configs as one JSON file each."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, cfg in DEFAULT_FIXTURES.items():
        path = directory / f"{name}.json"
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            json.dump(cfg, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    return written


def load_fixture_config(path: str | os.PathLike) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        cfg = json.load(fh)
    for key in ("name", "map", "start", "target"):
        if key not in cfg:
            raise MapFormatError(f"{path}: fixture config missing {key!r}")
    return cfg

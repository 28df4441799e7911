"""File ingestion and export: PGM (P2/P5) and CSV grids, drift fields, potentials.

CSV grids are row-major, one grid row per line, comma-separated decimals
written with %.17g so a save/load round trip is bit-exact for float64.
PGM supports both ASCII (P2) and binary (P5) with maxval up to 65535;
16-bit binary samples are big-endian per the format.  Row 0 of the file is
row 0 of the grid; no vertical flipping is applied anywhere.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DegenerateMapError, MapFormatError, MapShapeError
from .grid import DEFAULT_FLOOR, GridGeometry, ProbabilityGrid, VectorFieldGrid

Array = np.ndarray

_FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------------------
# CSV


def write_array_csv(values: Array, path: str | os.PathLike) -> None:
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in values:
            fh.write(",".join(_FLOAT_FMT % v for v in row))
            fh.write("\n")


def read_array_csv(path: str | os.PathLike) -> Array:
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise MapFormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise MapFormatError(f"{path}: empty CSV file")
    ncols = len(rows[0])
    if any(len(r) != ncols for r in rows):
        raise MapShapeError(f"{path}: rows have unequal lengths (not a rectangular grid)")
    return np.asarray(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# PGM


def read_pgm(path: str | os.PathLike) -> tuple[Array, int]:
    """Read a P2 or P5 PGM file. Returns (raw counts as float64, maxval)."""
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos:pos + 1]
            if c == b"#":  # comment to end of line
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MapFormatError(f"{path}: truncated PGM header")
        return data[start:pos]

    magic = next_token()
    if magic not in (b"P2", b"P5"):
        raise MapFormatError(f"{path}: not a PGM file (magic {magic!r})")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise MapFormatError(f"{path}: bad PGM header") from exc
    if width <= 0 or height <= 0 or not (0 < maxval <= 65535):
        raise MapFormatError(f"{path}: invalid PGM dimensions or maxval")

    n = width * height
    if magic == b"P2":
        try:
            samples = np.array(data[pos:].split(), dtype=np.float64)
        except ValueError as exc:
            raise MapFormatError(f"{path}: bad ASCII sample") from exc
        if samples.size != n:
            raise MapFormatError(f"{path}: expected {n} samples, got {samples.size}")
    else:
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos:pos + n * dtype.itemsize]
        if len(raw) != n * dtype.itemsize:
            raise MapFormatError(f"{path}: truncated PGM payload")
        samples = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    if samples.max(initial=0.0) > maxval:
        raise MapFormatError(f"{path}: sample exceeds declared maxval {maxval}")
    return samples.reshape(height, width), maxval


def write_pgm16(values01: Array, path: str | os.PathLike) -> None:
    """Write values in [0, 1] as a 16-bit binary PGM (linear map to [0, 65535])."""
    v = np.clip(np.asarray(values01, dtype=np.float64), 0.0, 1.0)
    counts = np.rint(v * 65535.0).astype(">u2")
    height, width = counts.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        fh.write(counts.tobytes())


# ---------------------------------------------------------------------------
# Probability maps


def _detect_format(path: str | os.PathLike, fmt: str | None) -> str:
    if fmt is not None:
        return fmt.lower()
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".pgm":
        return "pgm"
    if ext == ".csv":
        return "csv"
    raise MapFormatError(f"cannot infer map format from {path!r}; pass format explicitly")


def load_probability_map(path: str | os.PathLike, fmt: str | None = None,
                         spacing: float = 1.0,
                         floor: float = DEFAULT_FLOOR) -> ProbabilityGrid:
    """Load a map file and max-normalize it so the brightest cell is 1.

    Raw values must be finite and non-negative; an all-zero map is rejected
    because it has no admissible region.
    """
    fmt = _detect_format(path, fmt)
    if fmt == "pgm":
        raw, maxval = read_pgm(path)
        values = raw / float(maxval)
    elif fmt == "csv":
        values = read_array_csv(path)
    else:
        raise MapFormatError(f"unsupported map format {fmt!r}")
    if not np.all(np.isfinite(values)):
        raise MapFormatError(f"{path}: map contains non-finite values")
    if values.min() < 0.0:
        raise MapFormatError(f"{path}: map contains negative values")
    vmax = values.max()
    if vmax == 0.0:
        raise DegenerateMapError(f"{path}: map is all zero (no admissible region)")
    values = values / vmax
    geom = GridGeometry(width=values.shape[1], height=values.shape[0], spacing=spacing)
    return ProbabilityGrid(geom, values, floor=floor)


def save_probability_map_csv(grid: ProbabilityGrid, path: str | os.PathLike) -> None:
    write_array_csv(grid.values, path)


# ---------------------------------------------------------------------------
# Vector fields


def load_vector_field(path_vx: str | os.PathLike, path_vy: str | os.PathLike,
                      spacing: float = 1.0) -> VectorFieldGrid:
    """Load a drift field from two side-by-side CSV component files."""
    vx = read_array_csv(path_vx)
    vy = read_array_csv(path_vy)
    if vx.shape != vy.shape:
        raise MapShapeError(f"component shapes differ: {vx.shape} vs {vy.shape}")
    geom = GridGeometry(width=vx.shape[1], height=vx.shape[0], spacing=spacing)
    return VectorFieldGrid(geom, vx, vy)


def load_vector_field_interleaved(path: str | os.PathLike,
                                  spacing: float = 1.0) -> VectorFieldGrid:
    """Load a drift field from one CSV with interleaved (vx, vy) pairs per row."""
    raw = read_array_csv(path)
    if raw.shape[1] % 2 != 0:
        raise MapShapeError(f"{path}: interleaved CSV must have an even column count")
    vx = raw[:, 0::2]
    vy = raw[:, 1::2]
    geom = GridGeometry(width=vx.shape[1], height=vx.shape[0], spacing=spacing)
    return VectorFieldGrid(geom, vx, vy)


def save_vector_field(field: VectorFieldGrid, path_vx: str | os.PathLike,
                      path_vy: str | os.PathLike) -> None:
    write_array_csv(field.vx, path_vx)
    write_array_csv(field.vy, path_vy)


def save_vector_field_interleaved(field: VectorFieldGrid, path: str | os.PathLike) -> None:
    h, w = field.geometry.shape
    inter = np.empty((h, 2 * w), dtype=np.float64)
    inter[:, 0::2] = field.vx
    inter[:, 1::2] = field.vy
    write_array_csv(inter, path)

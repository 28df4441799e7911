import numpy as np
import pytest

from ghpf.errors import DegenerateMapError, MapFormatError, MapShapeError
from ghpf.grid import GridGeometry, ProbabilityGrid, VectorFieldGrid
from ghpf.mapio import (
    load_probability_map,
    load_vector_field,
    load_vector_field_interleaved,
    read_array_csv,
    read_pgm,
    save_probability_map_csv,
    save_vector_field,
    save_vector_field_interleaved,
    write_array_csv,
    write_pgm16,
)


def test_csv_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.random((9, 13))
    vals[0, 0] = 1.0
    vals[1, 1] = 1e-300
    path = tmp_path / "grid.csv"
    write_array_csv(vals, path)
    back = read_array_csv(path)
    assert np.array_equal(vals, back)


def test_csv_ragged_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,3\n1,2\n")
    with pytest.raises(MapShapeError):
        read_array_csv(path)


def test_csv_garbage_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,zebra\n")
    with pytest.raises(MapFormatError):
        read_array_csv(path)


def test_load_map_rescales_to_unit_max(tmp_path):
    path = tmp_path / "half.csv"
    write_array_csv(np.full((4, 4), 0.5), path)
    grid = load_probability_map(path)
    assert (grid.values == 1.0).all()


def test_load_map_rescale_idempotent(tmp_path):
    rng = np.random.default_rng(11)
    vals = rng.random((6, 6))
    vals[2, 2] = 1.0  # already max-normalized
    path = tmp_path / "norm.csv"
    write_array_csv(vals, path)
    grid = load_probability_map(path)
    assert np.array_equal(grid.values, vals)


def test_load_map_rejects_all_zero(tmp_path):
    path = tmp_path / "zero.csv"
    write_array_csv(np.zeros((4, 4)), path)
    with pytest.raises(DegenerateMapError):
        load_probability_map(path)


def test_load_map_rejects_negative(tmp_path):
    path = tmp_path / "neg.csv"
    write_array_csv(np.full((4, 4), -1.0), path)
    with pytest.raises(MapFormatError):
        load_probability_map(path)


def test_probability_map_csv_round_trip(tmp_path):
    geom = GridGeometry(5, 4)
    rng = np.random.default_rng(5)
    vals = rng.random(geom.shape)
    vals[0, 0] = 1.0
    grid = ProbabilityGrid(geom, vals)
    path = tmp_path / "map.csv"
    save_probability_map_csv(grid, path)
    back = load_probability_map(path)
    assert np.array_equal(back.values, grid.values)


def test_pgm_p5_binary_endpoints(tmp_path):
    # pixels {0, 255} load as probabilities {0, 1}
    path = tmp_path / "bw.pgm"
    data = np.array([[0, 255, 0], [255, 0, 255], [0, 255, 0]], dtype=np.uint8)
    path.write_bytes(b"P5\n3 3\n255\n" + data.tobytes())
    grid = load_probability_map(path)
    assert set(np.unique(grid.values)) == {0.0, 1.0}
    assert (grid.values == (data == 255)).all()
    assert (grid.zero_mask == (data == 0)).all()


def test_pgm_p2_ascii_with_comments(tmp_path):
    path = tmp_path / "ascii.pgm"
    path.write_text("P2\n# a comment\n3 3\n# another\n10\n0 5 10\n10 5 0\n5 10 5\n")
    raw, maxval = read_pgm(path)
    assert maxval == 10
    assert np.array_equal(raw, [[0, 5, 10], [10, 5, 0], [5, 10, 5]])
    grid = load_probability_map(path)
    assert grid.values[0, 1] == 0.5


def test_pgm_16bit_round_trip(tmp_path):
    geom = GridGeometry(8, 6)
    rng = np.random.default_rng(9)
    vals = rng.random(geom.shape)
    path = tmp_path / "pot.pgm"
    write_pgm16(vals, path)
    raw, maxval = read_pgm(path)
    assert maxval == 65535
    assert np.abs(raw / 65535.0 - vals).max() <= 0.5 / 65535.0


def test_pgm_bad_magic(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P7\n3 3\n255\n" + bytes(9))
    with pytest.raises(MapFormatError):
        read_pgm(path)


def test_pgm_truncated_payload(tmp_path):
    path = tmp_path / "trunc.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(7))
    with pytest.raises(MapFormatError):
        read_pgm(path)


def test_pgm_noise_histogram_matches_raw(tmp_path):
    # loader is a monotone rescale of the raw counts: histograms must agree
    rng = np.random.default_rng(21)
    raw = rng.integers(1, 256, size=(64, 64)).astype(np.uint8)
    path = tmp_path / "noise.pgm"
    path.write_bytes(b"P5\n64 64\n255\n" + raw.tobytes())
    grid = load_probability_map(path)
    assert grid.values.min() > 0.0
    assert grid.values.max() == 1.0
    assert not grid.zero_mask.any()
    _, raw_counts = np.unique(raw, return_counts=True)
    _, val_counts = np.unique(grid.values, return_counts=True)
    assert np.array_equal(raw_counts, val_counts)


def test_vector_field_two_file_round_trip(tmp_path):
    geom = GridGeometry(6, 4)
    rng = np.random.default_rng(2)
    f = VectorFieldGrid(geom, rng.standard_normal(geom.shape), rng.standard_normal(geom.shape))
    save_vector_field(f, tmp_path / "vx.csv", tmp_path / "vy.csv")
    back = load_vector_field(tmp_path / "vx.csv", tmp_path / "vy.csv")
    assert np.array_equal(back.vx, f.vx)
    assert np.array_equal(back.vy, f.vy)


def test_vector_field_interleaved_round_trip(tmp_path):
    geom = GridGeometry(5, 3)
    rng = np.random.default_rng(4)
    f = VectorFieldGrid(geom, rng.standard_normal(geom.shape), rng.standard_normal(geom.shape))
    save_vector_field_interleaved(f, tmp_path / "d.csv")
    back = load_vector_field_interleaved(tmp_path / "d.csv")
    assert np.array_equal(back.vx, f.vx)
    assert np.array_equal(back.vy, f.vy)


def test_vector_field_component_shape_mismatch(tmp_path):
    write_array_csv(np.zeros((3, 4)), tmp_path / "vx.csv")
    write_array_csv(np.zeros((3, 5)), tmp_path / "vy.csv")
    with pytest.raises(MapShapeError):
        load_vector_field(tmp_path / "vx.csv", tmp_path / "vy.csv")

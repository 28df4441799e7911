import math

import numpy as np
import pytest

from ghpf.drift import (
    DriftConfig,
    accumulated_utility,
    correlated_noise_field,
    drift_descriptor,
    point_cost_fc,
    solve_drift_bvp,
    vortex_field,
)
from ghpf.errors import ParameterError, PreconditionError
from ghpf.fixtures import central_block_map, ones_map
from ghpf.grid import Endpoints, GridGeometry, ProbabilityGrid, VectorFieldGrid
from ghpf.policy import REACHED_TARGET, integrate_streamline
from ghpf.solver import SolverConfig, sor_solve
from tests.test_policy import linear_potential, manual_trajectory


# ---------------------------------------------------------------------------
# point cost and descriptor


def test_fc_aiding_drift_is_free():
    # motion direction -grad V = (1, 0) parallel to drift
    assert point_cost_fc((-1.0, 0.0), (1.0, 0.0), 1.0) == 0.0


def test_fc_perpendicular_is_half():
    assert point_cost_fc((-1.0, 0.0), (0.0, 1.0), 1.0) == 0.5


def test_fc_opposing_is_full():
    assert point_cost_fc((1.0, 0.0), (1.0, 0.0), 1.0) == 1.0


def test_fc_neutral_on_degenerate_vectors():
    assert point_cost_fc((0.0, 0.0), (1.0, 0.0), 2.0) == 1.0
    assert point_cost_fc((1.0, 0.0), (0.0, 0.0), 2.0) == 1.0


def test_fc_requires_positive_k():
    with pytest.raises(ParameterError):
        point_cost_fc((1.0, 0.0), (1.0, 0.0), 0.0)


def test_fc_range_and_scale_invariance():
    rng = np.random.default_rng(17)
    for _ in range(200):
        g = rng.standard_normal(2)
        w = rng.standard_normal(2)
        k = rng.uniform(0.1, 5.0)
        fc = point_cost_fc(g, w, k)
        assert 0.0 <= fc <= k
        # power-of-two rescales are exact; generic rescales to round-off
        assert point_cost_fc(4.0 * g, w, k) == fc
        assert point_cost_fc(g, 0.5 * w, k) == fc
        assert point_cost_fc(1.7 * g, 0.3 * w, k) == pytest.approx(fc, rel=1e-12, abs=1e-15)


def test_descriptor_complements_cost():
    rng = np.random.default_rng(23)
    for _ in range(100):
        g = rng.standard_normal(2)
        w = rng.standard_normal(2)
        k = rng.uniform(0.1, 3.0)
        assert drift_descriptor(g, w, k) == k - point_cost_fc(g, w, k)


def test_descriptor_trivial_values():
    assert drift_descriptor((-1.0, 0.0), (1.0, 0.0), 1.0) == 1.0   # aiding
    assert drift_descriptor((1.0, 0.0), (1.0, 0.0), 1.0) == 0.0    # opposing
    assert drift_descriptor((1.0, 0.0), (0.0, 0.0), 1.0) == 0.5    # neutral


# ---------------------------------------------------------------------------
# drift field generators


def test_vortex_rotation_convention():
    # center on a cell center so on-axis cells exist
    geom = GridGeometry(48, 48)
    f = vortex_field(geom, (24.5, 24.5), 2.0, ccw=True)
    # cell directly right of center: drift points +y
    assert f.vx[24, 30] == pytest.approx(0.0, abs=1e-12)
    assert f.vy[24, 30] > 1.9
    # cell directly above center (+y): drift points -x
    assert f.vx[30, 24] < -1.9
    assert f.vy[30, 24] == pytest.approx(0.0, abs=1e-12)
    g = vortex_field(geom, (24.5, 24.5), 2.0, ccw=False)
    assert np.array_equal(g.vx, -f.vx)
    assert np.array_equal(g.vy, -f.vy)


def test_vortex_finite_at_center():
    geom = GridGeometry(9, 9)
    f = vortex_field(geom, (4.5, 4.5), 1.0)
    assert np.all(np.isfinite(f.vx)) and np.all(np.isfinite(f.vy))


def test_vortex_discrete_divergence_vanishes():
    geom = GridGeometry(48, 48)
    f = vortex_field(geom, (24.0, 24.0), 1.0, ccw=True)
    div = ((f.vx[1:-1, 2:] - f.vx[1:-1, :-2]) + (f.vy[2:, 1:-1] - f.vy[:-2, 1:-1])) / 2.0
    assert abs(div.sum()) < 1e-9


def test_correlated_noise_identity_kernel():
    geom = GridGeometry(32, 32)
    f = correlated_noise_field(geom, 5, 1)
    rng = np.random.default_rng(5)
    raw_x = rng.standard_normal(geom.shape)
    raw_y = rng.standard_normal(geom.shape)
    m = np.hypot(raw_x, raw_y).max()
    assert np.array_equal(f.vx, raw_x / m)
    assert np.array_equal(f.vy, raw_y / m)


def test_correlated_noise_deterministic_and_normalized():
    geom = GridGeometry(64, 64)
    a = correlated_noise_field(geom, 9, 5)
    b = correlated_noise_field(geom, 9, 5)
    assert np.array_equal(a.vx, b.vx) and np.array_equal(a.vy, b.vy)
    assert a.magnitude().max() == pytest.approx(1.0, rel=1e-12)


def test_correlated_noise_autocorrelation_drops():
    geom = GridGeometry(256, 256)
    ell = 8
    f = correlated_noise_field(geom, 31, ell)
    a = f.vx - f.vx.mean()
    lag0 = (a * a).mean()
    lag = (a[:, :-ell] * a[:, ell:]).mean()
    assert lag / lag0 < 0.5


def test_correlated_noise_requires_positive_length():
    with pytest.raises(ParameterError):
        correlated_noise_field(GridGeometry(8, 8), 0, 0)


# ---------------------------------------------------------------------------
# accumulated utility


def test_utility_zero_when_drift_aids_everywhere():
    geom = GridGeometry(32, 8)
    v = linear_potential(geom)  # descent direction +x everywhere
    psi = VectorFieldGrid(geom, np.ones(geom.shape), np.zeros(geom.shape))
    traj = manual_trajectory([(4.5, 4.5), (8.5, 4.5), (12.5, 4.5)], [1, 1, 1])
    assert accumulated_utility(traj, psi, v, 1.0) == 0.0


def test_utility_full_when_drift_opposes():
    geom = GridGeometry(32, 8)
    v = linear_potential(geom)
    psi = VectorFieldGrid(geom, -np.ones(geom.shape), np.zeros(geom.shape))
    traj = manual_trajectory([(4.5, 4.5), (8.5, 4.5), (12.5, 4.5)], [1, 1, 1])
    assert accumulated_utility(traj, psi, v, 1.0) == pytest.approx(traj.length, rel=1e-12)


# ---------------------------------------------------------------------------
# drift BVP


def test_zero_drift_reduces_to_neutral_plan():
    geom = GridGeometry(32, 32)
    obstacles = central_block_map(32, 32)
    psi = VectorFieldGrid(geom, np.zeros(geom.shape), np.zeros(geom.shape))
    ep = Endpoints((3.5, 16.5), (28.5, 16.5))
    sol = solve_drift_bvp(psi, obstacles, ep)
    assert sol.outer_converged
    assert sol.outer_iterations == 1
    expected = np.where(obstacles.zero_mask, 0.0, 0.5)
    assert np.array_equal(sol.descriptor.values, expected)
    # the potential equals the plain solve on the same scaled-conductivity map
    ref, _ = sor_solve(ProbabilityGrid(geom, expected, floor=obstacles.floor), ep)
    assert np.array_equal(sol.potential.values, ref.values)


def test_zero_drift_alpha_one_single_iteration():
    geom = GridGeometry(24, 24)
    obstacles = ones_map(24, 24)
    psi = VectorFieldGrid(geom, np.zeros(geom.shape), np.zeros(geom.shape))
    ep = Endpoints((3.5, 12.5), (20.5, 12.5))
    sol = solve_drift_bvp(psi, obstacles, ep, DriftConfig(alpha=1.0))
    assert sol.outer_converged and sol.outer_iterations == 1


def test_obstacle_cells_held_at_zero(solved_drift_scenes):
    scene = solved_drift_scenes["noise_drift_obstacle_96"]
    o_mask = scene["obstacles"].zero_mask
    assert (scene["sol"].descriptor.values[o_mask] == 0.0).all()


def test_descriptor_range(solved_drift_scenes):
    for name, scene in solved_drift_scenes.items():
        vals = scene["sol"].descriptor.values
        assert vals.min() >= 0.0 and vals.max() <= 1.0, name


def test_drift_trace_structure(solved_drift_scenes):
    sol = solved_drift_scenes["vortex_ccw_96"]["sol"]
    assert len(sol.trace) == sol.outer_iterations
    for entry in sol.trace:
        assert set(entry) == {"outer_iteration", "max_descriptor_change",
                              "inner_residual", "inner_iterations", "inner_converged"}


def test_drift_endpoints_validated():
    geom = GridGeometry(32, 32)
    obstacles = central_block_map(32, 32)
    psi = VectorFieldGrid(geom, np.zeros(geom.shape), np.zeros(geom.shape))
    inside_block = (16.0, 16.0)
    with pytest.raises(PreconditionError):
        solve_drift_bvp(psi, obstacles, Endpoints(inside_block, (28.5, 16.5)))


def test_vortex_scene_small_harvesting():
    # compact version of the vortex scene: path reaches the target and rides
    # the rotation; the full-size scene is covered by the acceptance suite
    geom = GridGeometry(48, 48)
    obstacles = ones_map(48, 48)
    psi = vortex_field(geom, (24.0, 24.0), 2.0, ccw=True)
    ep = Endpoints((7.5, 24.5), (40.5, 24.5))
    sol = solve_drift_bvp(psi, obstacles, ep)
    traj = integrate_streamline(sol.potential, sol.descriptor, ep.start)
    assert traj.status == REACHED_TARGET
    from ghpf.policy import harvesting_fraction, heading_drift_differential
    frac = harvesting_fraction(heading_drift_differential(traj, psi))
    assert frac >= 0.7
    # exploiting the drift beats the straight-line route on accumulated cost
    n = 60
    line = [(7.5 + (40.5 - 7.5) * k / (n - 1), 24.5) for k in range(n)]
    straight = manual_trajectory(line, np.ones(n))
    u_path = accumulated_utility(traj, psi, sol.potential, 1.0)
    u_line = accumulated_utility(straight, psi, sol.potential, 1.0)
    assert u_path < u_line


def test_drift_config_validation():
    for kwargs in (dict(k=0.0), dict(alpha=0.0), dict(alpha=1.5),
                   dict(outer_tol=0.0), dict(outer_max_iters=0)):
        with pytest.raises(ParameterError):
            DriftConfig(**kwargs)

import pytest

from ghpf.fixtures import DEFAULT_FIXTURES, DRIFT_SCENES, build_drift_field, build_map, endpoints_from
from ghpf.drift import solve_drift_bvp
from ghpf.grid import Endpoints
from ghpf.solver import sor_solve


@pytest.fixture(scope="session")
def solved_fixtures():
    """Each canonical planning fixture solved once at default config."""
    out = {}
    for name, cfg in DEFAULT_FIXTURES.items():
        p = build_map(cfg["map"])
        ep = endpoints_from(cfg)
        v, report = sor_solve(p, ep)
        out[name] = dict(cfg=cfg, p=p, endpoints=ep, v=v, report=report)
    return out


@pytest.fixture(scope="session")
def solved_drift_scenes():
    """Both canonical drift scenes solved once at default config."""
    out = {}
    for name, scene in DRIFT_SCENES.items():
        obstacles = build_map(scene["obstacles"])
        psi = build_drift_field(scene["drift"], obstacles.geometry)
        ep = Endpoints(tuple(scene["start"]), tuple(scene["target"]))
        sol = solve_drift_bvp(psi, obstacles, ep)
        out[name] = dict(scene=scene, obstacles=obstacles, psi=psi, endpoints=ep, sol=sol)
    return out

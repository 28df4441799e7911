"""Gamma-harmonic potential field planning on probabilistic grid maps."""

from .errors import (
    DegenerateMapError,
    GeometryMismatchError,
    GhpfError,
    MapFormatError,
    MapShapeError,
    OutOfDomainError,
    ParameterError,
    PreconditionError,
    UnreachableError,
)
from .grid import (
    Endpoints,
    GridGeometry,
    ProbabilityGrid,
    VectorFieldGrid,
    bilinear_at,
    binary_quantize,
    make_white_noise_map,
    validate_endpoints,
)
from .mapio import (
    load_probability_map,
    load_vector_field,
    load_vector_field_interleaved,
    read_pgm,
    save_probability_map_csv,
    save_vector_field,
    save_vector_field_interleaved,
    write_pgm16,
)
from .solver import (
    PotentialGrid,
    SolverConfig,
    SolverReport,
    dirichlet_energy,
    face_conductivity,
    residual,
    solve_with_pins,
    sor_solve,
)
from .policy import (
    CriticalPoint,
    CriticalPointReport,
    StreamlineParams,
    Trajectory,
    detect_critical_points,
    gradient_at,
    harvesting_fraction,
    heading_drift_differential,
    integrate_streamline,
    path_risk,
    policy_vectors,
)
from .drift import (
    DriftConfig,
    DriftSolution,
    accumulated_utility,
    correlated_noise_field,
    drift_descriptor,
    point_cost_fc,
    solve_drift_bvp,
    vortex_field,
)
from .oracle import OraclePath, PathComparison, compare_paths, dijkstra_min_risk

__version__ = "0.1.0"

"""Exception taxonomy shared by all modules.

Each class maps to one CLI exit code; see cli.EXIT_CODES.
"""


class GhpfError(Exception):
    """Base class for all planner errors."""


class MapFormatError(GhpfError):
    """Input map file cannot be parsed or contains invalid raw values."""


class MapShapeError(MapFormatError):
    """Input map file is not a rectangular grid."""


class DegenerateMapError(GhpfError):
    """Map has no admissible region (all cells zero)."""


class ParameterError(GhpfError):
    """A configuration or argument value is outside its documented range."""


class PreconditionError(ParameterError):
    """An operation's documented precondition is violated (e.g. endpoint in a zero-probability cell)."""


class GeometryMismatchError(ParameterError):
    """Two grid objects that must share geometry do not."""


class OutOfDomainError(GhpfError):
    """A continuous query point lies outside the interpolation domain."""


class UnreachableError(GhpfError):
    """No admissible path connects start and target."""

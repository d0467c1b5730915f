"""Interface values of the heat equation in layered media from contour integrals."""

from .closedform import closed_form_trace, n1_finite_neumann_values, n1_interface_values, whole_line_reference
from .contour import ContourSpec, InterfaceTrace, adapt_R, default_spec, evaluate, interface_map, trace
from .domain import (
    CompositeDomain,
    InitialData,
    PolyPiece,
    Problem,
    RobinBoundary,
    TimeSignal,
    mirror_problem,
    normalize,
    normalize_problem,
    validate,
)
from .errors import ConfigError, InterfaceMapError, NumericalError, PoleProximityError
from .fd import FdGrid, compare_traces, fd_solve, layerwise_bvp_solve

__version__ = "0.1.0"

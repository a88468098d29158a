"""Tracial Bratteli diagrams, unitary connections and their 2-cells.

The main entry points are re-exported here; the submodules hold the rest.
"""
__version__ = "0.1.0"

from .bratteli import TracialBratteli, pf_solve, validate_zero_cell
from .connection import (
    UnitaryConnection,
    build_graph_identity,
    build_vertex_model,
    gauge_transform,
    tensor_one_cells,
    validate_one_cell,
)
from .errors import (
    ConnCalcError,
    ConvergenceError,
    HypothesisError,
    SpectralError,
    StructuralError,
    ValidationError,
)
from .harmonic import (
    bounded_harmonic_basis,
    horizontal_compose,
    identity_two_cell,
    is_flat,
    periodic_two_cells,
    vertical_compose,
)
from .twocell import NtSpace, TwoCellSeq, loop_matrix, ucp_suite

__all__ = [
    "__version__",
    "TracialBratteli", "pf_solve", "validate_zero_cell",
    "UnitaryConnection", "build_graph_identity", "build_vertex_model", "gauge_transform",
    "tensor_one_cells", "validate_one_cell",
    "ConnCalcError", "ConvergenceError", "HypothesisError", "SpectralError", "StructuralError",
    "ValidationError",
    "bounded_harmonic_basis", "horizontal_compose", "identity_two_cell", "is_flat",
    "periodic_two_cells", "vertical_compose",
    "NtSpace", "TwoCellSeq", "loop_matrix", "ucp_suite",
]

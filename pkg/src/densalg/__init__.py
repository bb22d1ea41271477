"""Exact symbolic algebra of densities, long brackets and second-order operator pencils."""
from .scalar import Chart, Parity, PullbackChart, ScalarExpr, berezinian, left_inverse, substitute
from .parser import ParseError, parse_expression
from .densities import Density, Derivation, divergence, residue_pairing
from .operators import DiffOp, adjoint, apply, commutator, compose, grothendieck_order, specialize
from .phasespace import BracketData, PhaseFn, canonical_bracket, master_hamiltonian
from .brackets import (
    bracket_from_operator,
    canonical_pencil,
    check_jacobi_equations,
    classify_delta_squared,
    long_bracket_eval,
)
from .geometry import (
    ConnectionOnVol,
    CoordChange,
    bv_cocycle,
    bv_master_check,
    decompose_operator,
    existence_of_action_check,
    extract_upper_connection,
    flatness_check,
    lb_pencil_from_volume,
    pencil_from_connection,
    pencil_shift,
    recover_pencil,
    sturm_liouville_demo,
    transform_bracket_data,
    transform_operator,
)

__version__ = "0.1.0"

__all__ = [
    "Chart",
    "Parity",
    "PullbackChart",
    "ScalarExpr",
    "berezinian",
    "left_inverse",
    "substitute",
    "ParseError",
    "parse_expression",
    "Density",
    "Derivation",
    "divergence",
    "residue_pairing",
    "DiffOp",
    "adjoint",
    "apply",
    "commutator",
    "compose",
    "grothendieck_order",
    "specialize",
    "BracketData",
    "PhaseFn",
    "canonical_bracket",
    "master_hamiltonian",
    "bracket_from_operator",
    "canonical_pencil",
    "check_jacobi_equations",
    "classify_delta_squared",
    "long_bracket_eval",
    "ConnectionOnVol",
    "CoordChange",
    "bv_cocycle",
    "bv_master_check",
    "decompose_operator",
    "existence_of_action_check",
    "extract_upper_connection",
    "flatness_check",
    "lb_pencil_from_volume",
    "pencil_from_connection",
    "pencil_shift",
    "recover_pencil",
    "sturm_liouville_demo",
    "transform_bracket_data",
    "transform_operator",
]

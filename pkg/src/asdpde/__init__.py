"""Certified convex-variational solvers for transport and parabolic PDEs.

The library realizes a variational principle in which PDE solutions are
minimizers of explicit convex functionals whose infimum is exactly zero,
so the attained minimum doubles as a computable correctness certificate.
"""

from .asd import (
    asd_verify,
    compose_antisym,
    compose_skew_boundary,
    make_basic,
    make_broken_sign,
    regularize,
    resolvent_J,
)
from .convex import (
    FieldFunctional,
    GradientTerm,
    PointwisePotential,
    fenchel_gap,
    moreau_envelope,
)
from .evolution import (
    EvolutionProblem,
    Trajectory,
    semigroup_report,
    shift_potential,
    solve_prox_stepping,
    solve_spacetime,
)
from .expressions import parse_field_expression
from .mesh import Grid, VectorFieldSpec, build_grid, sigma_decompose
from .operators import (
    DirichletPLaplacian,
    SkewOperator,
    build_transport,
    green_residual,
    plap_subgrad,
)
from .stationary import (
    Certificate,
    StationaryProblem,
    assemble_I,
    resolvent_map_X,
    solve_stationary,
)

__version__ = "0.1.0"

__all__ = [
    "asd_verify",
    "compose_antisym",
    "compose_skew_boundary",
    "make_basic",
    "make_broken_sign",
    "regularize",
    "resolvent_J",
    "FieldFunctional",
    "GradientTerm",
    "PointwisePotential",
    "fenchel_gap",
    "moreau_envelope",
    "EvolutionProblem",
    "Trajectory",
    "semigroup_report",
    "shift_potential",
    "solve_prox_stepping",
    "solve_spacetime",
    "parse_field_expression",
    "Grid",
    "VectorFieldSpec",
    "build_grid",
    "sigma_decompose",
    "DirichletPLaplacian",
    "SkewOperator",
    "build_transport",
    "green_residual",
    "plap_subgrad",
    "Certificate",
    "StationaryProblem",
    "assemble_I",
    "resolvent_map_X",
    "solve_stationary",
    "__version__",
]

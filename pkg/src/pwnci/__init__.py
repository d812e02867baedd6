"""Confidence intervals for centers of piecewise normal distributions and for
solutions of stochastic variational inequalities."""

from .errors import (
    AmbiguousPieceError,
    ConvergenceError,
    DegenerateSolutionError,
    HomeomorphismError,
    NotPositiveDefiniteError,
    PwnciError,
    RayTerminationError,
    SingularBasisError,
)
from .gauss import (
    CovMatrix,
    ObliqueProjector,
    SubspaceBasis,
    build_projector,
    chi2_quantile,
    delta_general,
    delta_half_width,
    mvn_sample,
)
from .inference import (
    ConfidenceRegion,
    ci_x0,
    ci_z0,
    confidence_region,
    infer,
    lambda_hat,
    select_cell,
)
from .intervals import IntervalReport, Target
from .polyhedral import (
    BoxSet,
    Cell,
    Piece,
    PiecewiseLinearMap,
    Sign,
    cell_of_point,
    critical_cone,
    face_projection_data,
    lineality_space,
    n_cells_containing,
    normal_map_pieces,
    tangent_cone_K0,
)
from .pwnormal import PiecewiseNormalModel
from .svi import (
    SaaData,
    SaaSolution,
    SviProblem,
    assemble_saa,
    estimate_sigma,
    jacobian_MN,
    lcp_example,
    make_problem,
    qp_example,
    solve_lcp_lemke,
    solve_normal_map,
    solve_from_data,
    solve_saa,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousPieceError",
    "BoxSet",
    "Cell",
    "ConfidenceRegion",
    "ConvergenceError",
    "CovMatrix",
    "DegenerateSolutionError",
    "HomeomorphismError",
    "IntervalReport",
    "NotPositiveDefiniteError",
    "ObliqueProjector",
    "Piece",
    "PiecewiseLinearMap",
    "PiecewiseNormalModel",
    "PwnciError",
    "RayTerminationError",
    "SaaData",
    "SaaSolution",
    "Sign",
    "SingularBasisError",
    "SubspaceBasis",
    "SviProblem",
    "Target",
    "assemble_saa",
    "build_projector",
    "cell_of_point",
    "chi2_quantile",
    "ci_x0",
    "ci_z0",
    "confidence_region",
    "critical_cone",
    "delta_general",
    "delta_half_width",
    "estimate_sigma",
    "face_projection_data",
    "infer",
    "jacobian_MN",
    "lambda_hat",
    "lcp_example",
    "lineality_space",
    "make_problem",
    "mvn_sample",
    "n_cells_containing",
    "normal_map_pieces",
    "qp_example",
    "select_cell",
    "solve_lcp_lemke",
    "solve_normal_map",
    "solve_from_data",
    "solve_saa",
    "tangent_cone_K0",
]

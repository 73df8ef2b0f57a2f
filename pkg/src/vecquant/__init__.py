"""Vector quantile regression by discrete optimal transport."""

__version__ = "0.1.0"

from .core import Dataset, FeatureMap, RankGrid, gaussian_grid, load_dataset, sampled_grid, tensor_grid
from .errors import (
    CapabilityError,
    ParseError,
    ResourceError,
    SchemaError,
    SolverError,
    StateError,
    ValidationError,
    VqrError,
)
from .lp import LpProblem, LpSolution, assemble_primal, duality_gap_report, solve
from .vqr import (
    FitOptions,
    VqrFit,
    barycentric_ranks,
    cross_partial,
    empirical_copula,
    evaluate_quantile,
    fit,
    monotonicity_report,
    quantile_treatment_effect,
    recover_beta,
)

__all__ = [
    "CapabilityError", "Dataset", "FeatureMap", "FitOptions", "LpProblem", "LpSolution", "ParseError",
    "RankGrid", "ResourceError", "SchemaError", "SolverError", "StateError", "ValidationError", "VqrError",
    "VqrFit", "assemble_primal", "barycentric_ranks", "cross_partial", "duality_gap_report",
    "empirical_copula", "evaluate_quantile", "fit", "gaussian_grid", "load_dataset",
    "monotonicity_report", "quantile_treatment_effect", "recover_beta", "sampled_grid", "solve",
    "tensor_grid",
]

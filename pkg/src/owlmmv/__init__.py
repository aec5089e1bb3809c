"""Joint sparse recovery with the orthogonally weighted l2,1 regularizer.

The package solves multiple-measurement-vector problems ``A Z ~= Y`` for a
row-sparse ``Z`` by minimizing ``Psi_gamma(Z) + ||A Z - Y||^2 / (2 alpha)``
with a variable-metric proximal gradient method, adapting ``alpha`` to a
noise level and following ``gamma`` from the group lasso (``gamma = 1``)
down to the rank-aware ``owl21`` functional (``gamma = 0``).
"""

from .exceptions import (
    CsvParseError,
    DimensionMismatchError,
    InvalidInputError,
    LineSearchError,
    OwlError,
    RankDeficiencyError,
    SizeLimitError,
)
from .features import FeatureSelection, select_columns
from .harness import SynthSpec, run_sweep, run_trial
from .linalg import WeightMatrix, compact_svd, lwp_norm, prox_w, spark
from .reduction import (
    expand_solution,
    reduce_data,
    reduce_dictionary,
    refit_least_squares,
    select_features,
)
from .regularizer import build_lambda, build_weight, objective, owl21, psi_gamma, stationarity
from .solver import (
    SolveReport,
    SolverConfig,
    Termination,
    solve_continuation,
    solve_discrepancy,
    solve_fixed,
)

__version__ = "0.1.0"

__all__ = [
    "CsvParseError",
    "DimensionMismatchError",
    "FeatureSelection",
    "InvalidInputError",
    "LineSearchError",
    "OwlError",
    "RankDeficiencyError",
    "SizeLimitError",
    "SolveReport",
    "SolverConfig",
    "SynthSpec",
    "Termination",
    "WeightMatrix",
    "build_lambda",
    "build_weight",
    "compact_svd",
    "expand_solution",
    "lwp_norm",
    "objective",
    "owl21",
    "prox_w",
    "psi_gamma",
    "reduce_data",
    "reduce_dictionary",
    "refit_least_squares",
    "run_sweep",
    "run_trial",
    "select_columns",
    "select_features",
    "solve_continuation",
    "solve_discrepancy",
    "solve_fixed",
    "spark",
    "stationarity",
]

"""Column subset selection through row-sparse self-representation.

Given data ``A`` (samples x features) we look for a row-sparse ``Z`` with
``A Z ~= A``; the nonzero rows of ``Z`` name the features that reconstruct
the rest. With ``A = P Sigma Q`` the problem is solved against the reduced
right-hand side ``A' = P Sigma'`` so the metric matrices are only
``K' x K'``, and the solution is mapped back by ``Z = Z' Q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix
from .reduction import (
    FeatureRanking,
    expand_solution,
    reduce_dictionary,
    refit_least_squares,
    select_features,
)
from .solver import NOISELESS_DELTA, SolveReport, SolverConfig, solve_continuation

__all__ = ["FeatureSelection", "cumulative_refit", "select_columns"]


@dataclass
class FeatureSelection:
    ranking: FeatureRanking
    rmse_cumulative: list
    report: SolveReport
    Z: np.ndarray
    reduced_rank: int

    def rows(self):
        """``(rank, feature_index, score, rmse_cumulative)`` tuples, rank starting at 1."""
        return [
            (k + 1, idx, score, rmse)
            for k, (idx, score, rmse) in enumerate(
                zip(self.ranking.indices, self.ranking.scores, self.rmse_cumulative)
            )
        ]


def cumulative_refit(A, Y, order) -> list:
    """RMSE of the least-squares refit on the first ``k`` entries of ``order``, for every ``k``."""
    return [refit_least_squares(A, Y, order[: k + 1])[1] for k in range(len(order))]


def select_columns(
    A,
    tol: float = 1e-6,
    config: SolverConfig | None = None,
    prune_rel: float = 1e-6,
    **solve_kwargs,
) -> FeatureSelection:
    """Rank the columns of ``A`` by how much they are needed to rebuild ``A``.

    ``tol`` is the relative reconstruction tolerance. It sets both the
    singular value cutoff of the reduction (relative to ``sigma_max``) and
    the discrepancy target ``delta = tol * ||A||_Fro``.
    """
    A = as_matrix(A, "A")
    red = reduce_dictionary(A, tol)
    delta = max(tol * float(np.linalg.norm(A)), NOISELESS_DELTA)
    rep = solve_continuation(A, red.Yprime, delta, config, **solve_kwargs)
    Z = expand_solution(rep.Z_final, red.Q)
    ranking = select_features(Z, prune_rel)
    rmse = cumulative_refit(A, A, list(ranking.indices)) if ranking.indices else []
    return FeatureSelection(ranking, rmse, rep, Z, red.r)

"""SVD-based problem reduction, feature ranking and least-squares refit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, InvalidInputError
from .linalg import as_matrix, compact_svd, row_norms

__all__ = [
    "ReducedData",
    "FeatureRanking",
    "reduce_data",
    "reduce_dictionary",
    "expand_solution",
    "select_features",
    "refit_least_squares",
]


@dataclass(frozen=True)
class ReducedData:
    """Factorization ``Y ~= Yprime @ Q`` with ``Q Q^T = I_r``."""

    Yprime: np.ndarray
    Q: np.ndarray
    r: int
    tol_used: float


@dataclass(frozen=True)
class FeatureRanking:
    """Rows ranked by Euclidean norm, spurious ones pruned."""

    indices: tuple
    scores: tuple
    pruned_count: int

    def __len__(self):
        return len(self.indices)


def reduce_data(Y, rel_tol: float = 1e-12) -> ReducedData:
    """Project ``Y`` onto its dominant right singular subspace.

    Keeps singular values above ``rel_tol * sigma_max``; ``Yprime = U Sigma``
    and ``Q = V^T`` restricted to them.
    """
    Y = as_matrix(Y, "Y")
    svd = compact_svd(Y, rel_tol)
    if svd.rank == 0:
        raise InvalidInputError("cannot reduce a zero matrix")
    return ReducedData(svd.U * svd.sigma, svd.Vt, svd.rank, rel_tol)


def reduce_dictionary(A, rel_tol: float = 1e-12) -> ReducedData:
    """Low-rank factor ``A' = P Sigma'`` of a dictionary, ``A ~= A' Q``.

    Used for self-representation problems where ``A`` also plays the role of
    the observations: solving with ``A'`` as data needs only ``K' x K'``
    metric inversions.
    """
    return reduce_data(as_matrix(A, "A"), rel_tol)


def expand_solution(Zprime, Q) -> np.ndarray:
    """Map a reduced solution back: ``Z = Z' Q``."""
    Zprime = as_matrix(Zprime, "Zprime")
    Q = as_matrix(Q, "Q")
    if Zprime.shape[1] != Q.shape[0]:
        raise DimensionMismatchError(f"Z' has {Zprime.shape[1]} columns, Q has {Q.shape[0]} rows")
    return Zprime @ Q


def select_features(Z, prune_rel: float = 1e-6) -> FeatureRanking:
    """Rank rows of ``Z`` by norm, dropping those below ``prune_rel * max``.

    Ties are broken by ascending row index. An all-zero ``Z`` gives an empty
    ranking.
    """
    Z = as_matrix(Z, "Z")
    norms = row_norms(Z)
    top = norms.max(initial=0.0)
    if top == 0.0:
        return FeatureRanking((), (), Z.shape[0])
    order = np.lexsort((np.arange(norms.size), -norms))
    keep = norms[order] >= prune_rel * top
    idx = order[keep]
    return FeatureRanking(
        tuple(int(i) for i in idx),
        tuple(float(s) for s in norms[idx]),
        int(norms.size - idx.size),
    )


def refit_least_squares(A, Y, support):
    """Least-squares coefficients on ``support`` and the entrywise RMSE.

    Returns
    -------
    X_ls : ndarray
        ``N x K`` matrix, zero outside ``support``.
    rmse : float
        ``||A X_ls - Y||_Fro / sqrt(M K)``.
    """
    A = as_matrix(A, "A")
    Y = as_matrix(Y, "Y")
    support = np.asarray(list(support), dtype=int)
    if support.size == 0:
        raise InvalidInputError("support must be nonempty")
    coef, *_ = np.linalg.lstsq(A[:, support], Y, rcond=None)
    X = np.zeros((A.shape[1], Y.shape[1]))
    X[support] = coef
    rmse = float(np.linalg.norm(A @ X - Y) / np.sqrt(Y.size))
    return X, rmse

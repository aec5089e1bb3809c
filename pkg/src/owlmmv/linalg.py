"""Dense linear algebra kernel.

Matrices are plain 2-D ``numpy.ndarray`` objects of ``float64``. Rows of an
``N x K`` coefficient matrix ``Z`` are the vectors ``z_n`` whose (weighted)
Euclidean norms drive every row-sparsity measure in the package.

The weighted norms use a symmetric positive definite ``K x K`` matrix ``W``::

    ||z||_W       = sqrt(z^T W z)
    ||Z||_{W,p}   = (sum_n ||z_n||_W^p)^(1/p),   p in {1, 2, inf}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np
from scipy import linalg as sla

from .exceptions import (
    DimensionMismatchError,
    InvalidInputError,
    SizeLimitError,
)

__all__ = [
    "RANK_TOL",
    "CompactSvd",
    "WeightMatrix",
    "as_matrix",
    "compact_svd",
    "numerical_rank",
    "pinv_sqrt",
    "sv_apply",
    "w_gamma",
    "row_norms",
    "weighted_row_norm",
    "weighted_row_norms",
    "lwp_norm",
    "l21_norm",
    "row_sparsity",
    "prox_w",
    "spark",
]

#: Default relative rank tolerance (relative to the largest singular value).
RANK_TOL = 1e-10

SPARK_MAX_COLS = 20


def as_matrix(X, name="matrix") -> np.ndarray:
    """Return ``X`` as a finite 2-D float array.

    1-D input is promoted to a column. Raises :class:`InvalidInputError` on
    non-finite entries or higher-dimensional input.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return X


@dataclass(frozen=True)
class CompactSvd:
    """Truncated factorization ``Z = U diag(sigma) Vt``.

    ``U`` is ``N x r`` with orthonormal columns, ``Vt`` is ``r x K`` with
    orthonormal rows and ``sigma`` is strictly positive and non-increasing.
    """

    U: np.ndarray
    sigma: np.ndarray
    Vt: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.Vt


def compact_svd(Z, rank_tol: float = RANK_TOL) -> CompactSvd:
    """Compact SVD keeping singular values above ``rank_tol * sigma_max``.

    The zero matrix yields empty factors (``r = 0``). Signs of the singular
    vectors are whatever LAPACK returns.
    """
    Z = as_matrix(Z, "Z")
    if rank_tol < 0:
        raise InvalidInputError("rank_tol must be nonnegative")
    N, K = Z.shape
    if Z.size == 0:
        return CompactSvd(np.zeros((N, 0)), np.zeros(0), np.zeros((0, K)))
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        r = 0
    else:
        r = int(np.count_nonzero(s > rank_tol * smax))
    return CompactSvd(U[:, :r].copy(), s[:r].copy(), Vt[:r].copy())


def numerical_rank(Z, rank_tol: float = RANK_TOL) -> int:
    return compact_svd(Z, rank_tol).rank


def pinv_sqrt(S, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Square root of the pseudo-inverse of a symmetric PSD matrix.

    Eigenvalues at or below ``rank_tol * lambda_max`` are treated as zero.
    """
    S = as_matrix(S, "S")
    n, m = S.shape
    if n != m:
        raise DimensionMismatchError(f"S must be square, got {S.shape}")
    scale = max(np.abs(S).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(S - S.T).max(initial=0.0) > 1e-10 * scale:
        raise InvalidInputError("S is not symmetric")
    lam, V = np.linalg.eigh((S + S.T) / 2)
    lmax = lam.max(initial=0.0)
    if lmax <= 0.0:
        if lam.min(initial=0.0) < -1e-10 * scale:
            raise InvalidInputError("S is indefinite")
        return np.zeros_like(S)
    if lam.min() < -1e-10 * lmax:
        raise InvalidInputError("S is indefinite")
    keep = lam > rank_tol * lmax
    inv_root = np.zeros_like(lam)
    inv_root[keep] = 1.0 / np.sqrt(lam[keep])
    return (V * inv_root) @ V.T


def sv_apply(Z, f: Callable[[np.ndarray], np.ndarray], rank_tol: float = RANK_TOL) -> np.ndarray:
    """Singular value calculus: ``U f(Sigma) V^T`` over the compact SVD.

    ``f`` acts elementwise on the vector of singular values and must satisfy
    ``f(0) = 0``; singular values below the rank tolerance are discarded.
    """
    Z = as_matrix(Z, "Z")
    svd = compact_svd(Z, rank_tol)
    if svd.rank == 0:
        return np.zeros_like(Z)
    fs = np.asarray(f(svd.sigma), dtype=float)
    return (svd.U * fs) @ svd.Vt


def w_gamma(gamma: float) -> Callable[[np.ndarray], np.ndarray]:
    """Scalar weight ``sigma / sqrt(gamma + (1 - gamma) sigma^2)``.

    ``gamma = 0`` gives the step function (0 at 0, 1 elsewhere).
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0.0:
        return lambda s: (np.asarray(s) > 0).astype(float)
    return lambda s: np.asarray(s) / np.sqrt(gamma + (1.0 - gamma) * np.asarray(s) ** 2)


@dataclass(frozen=True)
class WeightMatrix:
    """SPD metric ``W`` together with its inverse.

    Parameters
    ----------
    W : ndarray
        Symmetric positive definite ``K x K`` matrix.
    Minv_of : ndarray, optional
        ``W^{-1}``; computed by Cholesky if omitted.
    """

    W: np.ndarray
    Minv_of: np.ndarray = field(default=None)

    def __post_init__(self):
        W = as_matrix(self.W, "W")
        if W.shape[0] != W.shape[1]:
            raise DimensionMismatchError(f"W must be square, got {W.shape}")
        W = (W + W.T) / 2
        object.__setattr__(self, "W", W)
        if self.Minv_of is None:
            try:
                cf = sla.cho_factor(W)
            except np.linalg.LinAlgError as exc:
                raise InvalidInputError("W is not positive definite") from exc
            object.__setattr__(self, "Minv_of", sla.cho_solve(cf, np.eye(W.shape[0])))
        else:
            M = as_matrix(self.Minv_of, "Minv_of")
            object.__setattr__(self, "Minv_of", (M + M.T) / 2)

    @classmethod
    def from_inverse(cls, M) -> "WeightMatrix":
        """Build ``W = M^{-1}`` from an SPD matrix ``M``."""
        M = as_matrix(M, "M")
        M = (M + M.T) / 2
        try:
            cf = sla.cho_factor(M)
        except np.linalg.LinAlgError as exc:
            raise InvalidInputError("M is not positive definite") from exc
        W = sla.cho_solve(cf, np.eye(M.shape[0]))
        return cls(W, M)

    @classmethod
    def trusted(cls, W, M) -> "WeightMatrix":
        """Wrap an already symmetric pair ``W = M^{-1}`` without validation."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "W", W)
        object.__setattr__(obj, "Minv_of", M)
        return obj

    @property
    def dim(self) -> int:
        return self.W.shape[0]


def _weight_array(W) -> np.ndarray:
    if isinstance(W, WeightMatrix):
        return W.W
    return as_matrix(W, "W")


def row_norms(Z) -> np.ndarray:
    """Euclidean norms of the rows of ``Z``."""
    return np.sqrt(np.einsum("ij,ij->i", Z, Z))


def weighted_row_norms(Z, W) -> np.ndarray:
    """Vector of ``||z_n||_W`` for all rows of ``Z``."""
    Wa = _weight_array(W)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != Wa.shape[0]:
        raise DimensionMismatchError(
            f"Z has shape {Z.shape}, W has dimension {Wa.shape[0]}"
        )
    sq = np.einsum("ij,ij->i", Z @ Wa, Z)
    return np.sqrt(np.maximum(sq, 0.0))


def weighted_row_norm(z, W) -> float:
    """``sqrt(z^T W z)`` for a single vector ``z``."""
    z = np.asarray(z, dtype=float).ravel()
    Wa = _weight_array(W)
    if z.shape[0] != Wa.shape[0]:
        raise DimensionMismatchError(
            f"z has length {z.shape[0]}, W has dimension {Wa.shape[0]}"
        )
    return float(np.sqrt(max(z @ Wa @ z, 0.0)))


def lwp_norm(Z, W, p=1) -> float:
    """Mixed norm ``||Z||_{W,p}`` for ``p`` in ``{1, 2, inf}``."""
    norms = weighted_row_norms(Z, W)
    if p == 1:
        return float(norms.sum())
    if p == 2:
        return float(np.sqrt(np.sum(norms**2)))
    if p in (np.inf, "inf"):
        return float(norms.max(initial=0.0))
    raise InvalidInputError(f"p must be 1, 2 or inf, got {p!r}")


def l21_norm(Z) -> float:
    return float(row_norms(np.asarray(Z, dtype=float)).sum())


def row_sparsity(Z, tol: float = 0.0) -> int:
    """Number of rows with Euclidean norm above ``tol * max row norm``."""
    norms = row_norms(np.asarray(Z, dtype=float))
    m = norms.max(initial=0.0)
    if m == 0.0:
        return 0
    return int(np.count_nonzero(norms > tol * m))


def prox_w(Z, W, sigma: float) -> np.ndarray:
    """Proximal map of ``sigma * ||.||_{W,1}`` in the ``W`` inner product.

    Row ``n`` is scaled by ``max(0, 1 - sigma / ||z_n||_W)``; rows whose
    W-norm does not exceed ``sigma`` become exactly zero.
    """
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    Z = np.asarray(Z, dtype=float)
    norms = weighted_row_norms(Z, W)
    factor = np.zeros_like(norms)
    big = norms > sigma
    factor[big] = 1.0 - sigma / norms[big]
    return Z * factor[:, None]


def spark(A, rank_tol: float = RANK_TOL) -> int:
    """Smallest number of linearly dependent columns of ``A``.

    Brute force over column subsets, so limited to 20 columns. Returns
    ``cols + 1`` when every subset is independent.
    """
    A = as_matrix(A, "A")
    M, N = A.shape
    if N > SPARK_MAX_COLS:
        raise SizeLimitError(f"spark is limited to {SPARK_MAX_COLS} columns, got {N}")
    smax = np.linalg.norm(A, 2) if A.size else 0.0
    tol = rank_tol * smax
    for k in range(1, N + 1):
        if k > M:
            return k
        for cols in combinations(range(N), k):
            s = np.linalg.svd(A[:, cols], compute_uv=False)
            if np.count_nonzero(s > tol) < k:
                return k
    return N + 1

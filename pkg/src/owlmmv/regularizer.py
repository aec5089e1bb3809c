"""The relaxed orthogonally weighted l2,1 family and its first-order machinery.

For ``gamma`` in ``[0, 1]`` the regularizer is::

    Psi_gamma(Z) = || Z (gamma I + (1 - gamma) Z^T Z)^{+/2} ||_{2,1}

which equals the group lasso penalty at ``gamma = 1`` and the orthogonally
weighted l2,1 functional (``owl21``) at ``gamma = 0``. Writing
``M = gamma I + (1 - gamma) Z^T Z`` and ``W = M^{-1}`` one has
``Psi_gamma(Z) = ||Z||_{W,1}``, which is what the solver linearizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .exceptions import DimensionMismatchError, InvalidInputError, RankDeficiencyError
from .linalg import (
    RANK_TOL,
    WeightMatrix,
    as_matrix,
    compact_svd,
    lwp_norm,
    row_norms,
    w_gamma,
    weighted_row_norms,
)

__all__ = [
    "COND_CAP",
    "ZERO_ROW_TOL",
    "GammaWeight",
    "ModelAnchor",
    "StationarityReport",
    "psi_gamma",
    "psi_change",
    "weighted_norm_change",
    "metric_shift",
    "metric_arrays",
    "owl21",
    "build_weight",
    "build_lambda",
    "make_anchor",
    "objective",
    "data_fit",
    "model_psi",
    "smooth_gradient",
    "stationarity",
    "nonzero_rows",
]

COND_CAP = 1e12
ZERO_ROW_TOL = 1e-12


def _check_gamma(gamma):
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError(f"gamma must lie in [0, 1], got {gamma}")


def psi_gamma(Z, gamma: float, rank_tol: float = RANK_TOL) -> float:
    """Evaluate ``Psi_gamma(Z)`` through the singular values of ``Z``.

    Uses ``Psi_gamma(Z) = ||U w_gamma(Sigma)||_{2,1}``. At ``gamma = 0`` the
    numerical rank (``rank_tol`` relative to ``sigma_max``) decides which
    directions count. For ``gamma > 0`` only singular values at the SVD's
    own roundoff level (``max(N, K) * eps * sigma_max``) are dropped; kept
    as they are, they would weigh almost 1 once ``gamma`` falls below ``eps**2``.
    """
    _check_gamma(gamma)
    Z = as_matrix(Z, "Z")
    if gamma == 1.0:
        return float(row_norms(Z).sum())
    svd = compact_svd(Z, rank_tol if gamma == 0.0 else max(Z.shape) * np.finfo(float).eps)
    if svd.rank == 0:
        return 0.0
    weights = w_gamma(gamma)(svd.sigma)
    return float(row_norms(svd.U * weights).sum())


def owl21(Z, rank_tol: float = RANK_TOL) -> float:
    """Orthogonally weighted l2,1: the l2,1 norm of an orthonormal basis of range(Z)."""
    return psi_gamma(Z, 0.0, rank_tol)


@dataclass(frozen=True)
class GammaWeight:
    """Metric data at a linearization point.

    Attributes
    ----------
    gamma : float
    M : ndarray
        ``gamma I + (1 - gamma) Z^T Z``.
    weight : WeightMatrix
        ``W = M^{-1}`` with ``M`` cached as ``weight.Minv_of``.
    cond : float
        1-norm condition estimate of ``M``.
    """

    gamma: float
    M: np.ndarray
    weight: WeightMatrix
    cond: float

    @property
    def W(self) -> np.ndarray:
        return self.weight.W


def metric_arrays(Z, gamma: float, cond_cap: float = COND_CAP):
    """``(M, W, cond)`` for ``M = gamma I + (1 - gamma) Z^T Z`` and ``W = M^{-1}``.

    Works on a plain array with no input checks; :func:`build_weight` is the
    validating entry point. ``cond`` is the LAPACK 1-norm condition estimate
    from the Cholesky factor, which is within a factor ``K`` of the spectral
    condition number and far cheaper than an eigendecomposition.
    """
    K = Z.shape[1]
    if gamma == 1.0:
        eye = np.eye(K)
        return eye, eye, 1.0
    M = (1.0 - gamma) * (Z.T @ Z)
    M.flat[:: K + 1] += gamma
    R, info = lapack.dpotrf(M, lower=0, clean=1)
    cond = float("inf")
    if info == 0:
        rcond, _ = lapack.dpocon(R, np.abs(M).sum(axis=0).max())
        cond = 1.0 / rcond if rcond > 0 else float("inf")
    if info != 0 or cond == float("inf") or (gamma == 0.0 and cond > cond_cap):
        raise RankDeficiencyError(
            f"metric matrix is rank deficient (cond={cond:.3e}, gamma={gamma})", cond
        )
    U, _ = lapack.dpotri(R, lower=0)
    # dpotri fills the upper triangle; the lower one is zero since R was cleaned.
    W = U + U.T
    W.flat[:: K + 1] *= 0.5
    return M, W, cond


def build_weight(Z, gamma: float, cond_cap: float = COND_CAP) -> GammaWeight:
    """Form ``M = gamma I + (1 - gamma) Z^T Z`` and ``W = M^{-1}``.

    Raises
    ------
    RankDeficiencyError
        If ``M`` is singular, or at ``gamma = 0`` its condition number
        exceeds ``cond_cap``.
    """
    _check_gamma(gamma)
    Z = as_matrix(Z, "Z")
    M, W, cond = metric_arrays(Z, gamma, cond_cap)
    return GammaWeight(gamma, M, WeightMatrix.trusted(W, M), cond)


def _row_sq(X, Y):
    return np.einsum("ij,ij->i", X, Y)


def _quotient_sum(num, den) -> float:
    pos = den > 0
    return float((num[pos] / den[pos]).sum())


def weighted_norm_change(Z, Zplus, W) -> float:
    """``||Zplus||_{W,1} - ||Z||_{W,1}`` with row numerators ``<z+ - z, z+ + z>_W``."""
    Z = np.asarray(Z, dtype=float)
    Zp = np.asarray(Zplus, dtype=float)
    ZW, ZpW = Z @ W, Zp @ W
    a = np.sqrt(np.maximum(_row_sq(ZW, Z), 0.0))
    b = np.sqrt(np.maximum(_row_sq(ZpW, Zp), 0.0))
    return _quotient_sum(_row_sq(ZpW - ZW, Zp + Z), a + b)


def metric_shift(Z, Zplus, ZpW, b, Wp, gamma: float) -> float:
    """``||Z+||_{W+,1} - ||Z+||_{W,1}`` from ``D = Z+ - Z``.

    ``ZpW = Z+ W`` and ``b`` (the ``W``-row norms of ``Z+``) are passed in
    since callers usually have them. Uses ``W+ - W = -W+ (M+ - M) W`` with
    ``M+ - M = (1 - gamma)(D^T Z+ + Z^T D)``.
    """
    if gamma == 1.0:
        return 0.0
    D = Zplus - Z
    ZpWp = Zplus @ Wp
    c = np.sqrt(np.maximum(_row_sq(ZpWp, Zplus), 0.0))
    dM = (1.0 - gamma) * (D.T @ Zplus + Z.T @ D)
    return _quotient_sum(-_row_sq(ZpWp @ dM, ZpW), b + c)


def psi_change(Z, Zplus, weight: GammaWeight, weight_plus: GammaWeight) -> float:
    """``Psi_gamma(Zplus) - Psi_gamma(Z)`` without cancellation.

    ``weight`` and ``weight_plus`` are the metrics at ``Z`` and ``Zplus``.
    Each row contributes ``||z+||_{W+} - ||z||_W``, split as
    ``(||z+||_W - ||z||_W) + (||z+||_{W+} - ||z+||_W)``; both parts are
    rewritten as quotients whose numerators are formed from ``D = Zplus - Z``
    directly, so the result keeps its relative accuracy when ``D`` is tiny.
    """
    Z = np.asarray(Z, dtype=float)
    Zp = np.asarray(Zplus, dtype=float)
    ZpW = Zp @ weight.W
    b = np.sqrt(np.maximum(_row_sq(ZpW, Zp), 0.0))
    return weighted_norm_change(Z, Zp, weight.W) + metric_shift(
        Z, Zp, ZpW, b, weight_plus.W, weight.gamma
    )


def nonzero_rows(Z, zero_row_tol: float = ZERO_ROW_TOL) -> np.ndarray:
    """Boolean mask of rows counted as nonzero.

    A row is zero when its norm is at most ``zero_row_tol`` times the largest
    row norm (with an absolute floor of 1e-300).
    """
    norms = row_norms(Z)
    thresh = max(zero_row_tol * norms.max(initial=0.0), 1e-300)
    return norms > thresh


def build_lambda(Z, weight: GammaWeight, zero_row_tol: float = ZERO_ROW_TOL) -> np.ndarray:
    """Multiplier ``Lambda = -sum_n (1-gamma)/||z_n||_W  W z_n z_n^T W``.

    Zero rows contribute nothing. The result is symmetric negative
    semidefinite.
    """
    Z = np.asarray(Z, dtype=float)
    K = Z.shape[1]
    if weight.gamma == 1.0:
        return np.zeros((K, K))
    mask = nonzero_rows(Z, zero_row_tol)
    Zs = Z[mask]
    if Zs.shape[0] == 0:
        return np.zeros((K, K))
    WZ = Zs @ weight.W
    wn = np.sqrt(np.maximum(np.einsum("ij,ij->i", WZ, Zs), 0.0))
    Lam = -(1.0 - weight.gamma) * (WZ.T / wn) @ WZ
    return (Lam + Lam.T) / 2


@dataclass(frozen=True)
class ModelAnchor:
    """Linearization point of the convex model of ``Psi_gamma``."""

    Zhat: np.ndarray
    weight: GammaWeight
    Lambda: np.ndarray


def make_anchor(Zhat, gamma: float, cond_cap: float = COND_CAP) -> ModelAnchor:
    Zhat = as_matrix(Zhat, "Zhat")
    gw = build_weight(Zhat, gamma, cond_cap)
    return ModelAnchor(Zhat, gw, build_lambda(Zhat, gw))


def data_fit(Z, A, Y) -> float:
    """Frobenius misfit ``||A Z - Y||``."""
    return float(np.linalg.norm(A @ Z - Y))


def _check_shapes(Z, A, Y):
    if A.shape[1] != Z.shape[0] or A.shape[0] != Y.shape[0] or Z.shape[1] != Y.shape[1]:
        raise DimensionMismatchError(
            f"incompatible shapes A{A.shape}, Z{Z.shape}, Y{Y.shape}"
        )


def objective(Z, A, Y, alpha: float, gamma: float, rank_tol: float = RANK_TOL) -> float:
    """``J_gamma(Z) = Psi_gamma(Z) + ||A Z - Y||^2 / (2 alpha)``."""
    if not alpha > 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    Z = as_matrix(Z, "Z")
    A = as_matrix(A, "A")
    Y = as_matrix(Y, "Y")
    _check_shapes(Z, A, Y)
    r = A @ Z - Y
    return psi_gamma(Z, gamma, rank_tol) + float(np.vdot(r, r)) / (2.0 * alpha)


def model_psi(Z, anchor: ModelAnchor) -> float:
    """Convex model ``||Z||_{W,1} + <Zhat Lambda, Z - Zhat>`` of ``Psi_gamma``."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape != anchor.Zhat.shape:
        raise DimensionMismatchError(
            f"Z has shape {Z.shape}, anchor has shape {anchor.Zhat.shape}"
        )
    lin = np.vdot(anchor.Zhat @ anchor.Lambda, Z - anchor.Zhat)
    return lwp_norm(Z, anchor.weight.weight, 1) + float(lin)


def smooth_gradient(Z, weight: GammaWeight, Lambda, A, Y, alpha: float) -> np.ndarray:
    """W-gradient ``G = (Z Lambda + A^T (A Z - Y) / alpha) M`` of the smooth Lagrange part."""
    H = Z @ Lambda + A.T @ (A @ Z - Y) / alpha
    return H @ weight.M


@dataclass(frozen=True)
class StationarityReport:
    """First-order residuals at a candidate solution.

    ``nonzero_residual`` is the largest ``||r_n||_{W^{-1}}`` of the equation
    residual over supported rows; ``zero_slack`` is the largest violation
    ``max(0, ||(A^T (A Z - Y))_n||_{W^{-1}} - alpha)`` over zero rows.
    """

    nonzero_residual: float
    zero_slack: float
    support: tuple


def stationarity(
    Z,
    A,
    Y,
    alpha: float,
    gamma: float,
    zero_row_tol: float = ZERO_ROW_TOL,
    cond_cap: float = COND_CAP,
) -> StationarityReport:
    """Evaluate the first-order necessary conditions at ``Z``."""
    Z = as_matrix(Z, "Z")
    A = as_matrix(A, "A")
    Y = as_matrix(Y, "Y")
    _check_shapes(Z, A, Y)
    gw = build_weight(Z, gamma, cond_cap)
    mask = nonzero_rows(Z, zero_row_tol)
    Lam = build_lambda(Z, gw, zero_row_tol)
    grad = A.T @ (A @ Z - Y)

    nonzero_res = 0.0
    if mask.any():
        Zs = Z[mask]
        wn = weighted_row_norms(Zs, gw.weight)
        R = (Zs @ gw.W) / wn[:, None] + Zs @ Lam + grad[mask] / alpha
        nonzero_res = float(weighted_row_norms(R, gw.M).max())

    zero_slack = 0.0
    if (~mask).any():
        gz = weighted_row_norms(grad[~mask], gw.M)
        zero_slack = float(max(0.0, gz.max() - alpha))
    return StationarityReport(nonzero_res, zero_slack, tuple(np.flatnonzero(mask).tolist()))

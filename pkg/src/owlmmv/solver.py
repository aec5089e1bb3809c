"""Variable-metric proximal gradient solver for ``Psi_gamma``-regularized least squares.

Minimizes::

    J(Z) = Psi_gamma(Z) + ||A Z - Y||_Fro^2 / (2 alpha)

Each iteration freezes the metric ``W_k = (gamma I + (1-gamma) Z_k^T Z_k)^{-1}``
and multiplier ``Lambda_k`` at the current iterate, takes a gradient step in
the ``W_k`` inner product and applies the closed-form row shrinkage of
``||.||_{W_k,1}``. Step sizes come from an Armijo rule on the predicted
decrease. Two outer drivers adapt ``alpha`` (discrepancy principle) and
``gamma`` (continuation from the convex group lasso down to ``gamma = 0``).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InvalidInputError, LineSearchError, RankDeficiencyError
from .linalg import RANK_TOL, WeightMatrix, as_matrix, compact_svd
from .regularizer import (
    COND_CAP,
    ZERO_ROW_TOL,
    GammaWeight,
    build_lambda,
    build_weight,
    objective,
    metric_arrays,
    metric_shift,
    weighted_norm_change,
)

__all__ = [
    "Termination",
    "SolverConfig",
    "SolverState",
    "SolveReport",
    "default_alpha",
    "init_state",
    "init_z0",
    "predicted_decrease",
    "armijo_step",
    "solve_fixed",
    "solve_discrepancy",
    "solve_continuation",
]

log = logging.getLogger(__name__)

ALPHA_MIN = 1e-12
ALPHA_MAX = 1e12
NOISELESS_DELTA = 1e-8
_EPS = np.finfo(float).eps


class Termination(str, enum.Enum):
    TOLERANCE_MET = "tolerance_met"
    MAX_ITER = "max_iter"
    DISCREPANCY_MET = "discrepancy_met"
    GUARD_TERMINATED = "guard_terminated"
    RANK_DEFICIENCY = "rank_deficiency"
    LINE_SEARCH_FAILED = "line_search_failed"
    ADAPTATION_FAILED = "adaptation_failed"

    def __str__(self):
        return self.value


#: Terminations that indicate the solver could not do its job.
FAILURES = frozenset(
    {Termination.RANK_DEFICIENCY, Termination.LINE_SEARCH_FAILED, Termination.ADAPTATION_FAILED}
)


@dataclass(frozen=True)
class SolverConfig:
    """Algorithmic constants.

    Parameters
    ----------
    gamma : float
        Relaxation parameter in ``[0, 1]``.
    alpha : float or None
        Regularization weight. ``None`` means "pick ``max_n ||(A^T Y)_n||``",
        the smallest value at which ``Z = 0`` is stationary for ``gamma = 1``.
    kappa : float
        Armijo fraction of the predicted decrease.
    beta : float
        Backtracking factor.
    sigma_max : float or None
        Step size cap; ``None`` means ``alpha / ||A||_op^2``.
    r_tol : float
        Relative tolerance of the stopping rule.
    alpha_factor : float
        Geometric factor of the discrepancy-driven alpha updates.
    alpha_update : {"geometric", "secant"}
        ``"geometric"`` moves alpha by ``alpha_factor``. ``"secant"`` rescales
        it by ``target / fit`` (the fit is nearly proportional to alpha once
        it is small), capped at ``secant_cap`` per update.
    secant_cap : float
        Largest ratio of one secant update.
    """

    gamma: float = 1.0
    alpha: float | None = None
    kappa: float = 0.1
    beta: float = 0.5
    sigma_max: float | None = None
    r_tol: float = 1e-6
    max_iter: int = 5000
    max_backtracks: int = 60
    cond_cap: float = COND_CAP
    zero_row_tol: float = ZERO_ROW_TOL
    rank_tol: float = RANK_TOL
    alpha_factor: float = 2.0
    max_alpha_updates: int = 100
    alpha_update: str = "geometric"
    secant_cap: float = 8.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidInputError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.alpha is not None and not self.alpha > 0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.kappa < 1.0:
            raise InvalidInputError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not 0.0 < self.beta < 1.0:
            raise InvalidInputError(f"beta must lie in (0, 1), got {self.beta}")
        if self.sigma_max is not None and not self.sigma_max > 0:
            raise InvalidInputError("sigma_max must be positive")
        if not self.r_tol > 0:
            raise InvalidInputError("r_tol must be positive")
        if self.max_iter < 1 or self.max_backtracks < 1:
            raise InvalidInputError("max_iter and max_backtracks must be positive")
        if not self.cond_cap > 1:
            raise InvalidInputError("cond_cap must exceed 1")
        if not self.alpha_factor > 1:
            raise InvalidInputError("alpha_factor must exceed 1")
        if self.alpha_update not in ("geometric", "secant"):
            raise InvalidInputError(f"alpha_update must be 'geometric' or 'secant', got {self.alpha_update!r}")
        if not self.secant_cap > 1:
            raise InvalidInputError("secant_cap must exceed 1")


@dataclass(frozen=True)
class SolverState:
    """Iterate ``Z_k`` with the metric and multiplier linearized at it."""

    Z: np.ndarray
    weight: GammaWeight
    Lambda: np.ndarray
    sigma_prev: float
    J: float
    iter: int = 0


@dataclass
class SolveReport:
    """Outcome of a solve.

    ``J_trace`` holds the objective at every iterate (starting with the
    initial one); ``segment_starts`` marks the indices where a new
    ``(alpha, gamma)`` pair begins, since the objective changes there.
    ``alpha_trace`` and ``gamma_trace`` have one entry per segment.
    """

    Z_final: np.ndarray
    iterations: int
    termination: Termination
    J_trace: list = field(default_factory=list)
    pred_trace: list = field(default_factory=list)
    sigma_trace: list = field(default_factory=list)
    alpha_trace: list = field(default_factory=list)
    gamma_trace: list = field(default_factory=list)
    segment_starts: list = field(default_factory=list)
    fit_final: float = float("nan")
    alpha_final: float = float("nan")
    gamma_final: float = float("nan")
    message: str = ""

    @property
    def objective(self) -> float:
        return self.J_trace[-1] if self.J_trace else float("nan")

    @property
    def failed(self) -> bool:
        return self.termination in FAILURES

    def segments(self):
        """Yield the ``J_trace`` slices of each fixed-(alpha, gamma) segment."""
        starts = list(self.segment_starts) + [len(self.J_trace)]
        for a, b in zip(starts[:-1], starts[1:]):
            yield self.J_trace[a:b]

    def extend(self, other: "SolveReport"):
        """Append the traces of ``other`` and adopt its final state."""
        offset = len(self.J_trace)
        self.J_trace.extend(other.J_trace)
        self.pred_trace.extend(other.pred_trace)
        self.sigma_trace.extend(other.sigma_trace)
        self.alpha_trace.extend(other.alpha_trace)
        self.gamma_trace.extend(other.gamma_trace)
        self.segment_starts.extend(offset + s for s in other.segment_starts)
        self.iterations += other.iterations
        self.Z_final = other.Z_final
        self.termination = other.termination
        self.fit_final = other.fit_final
        self.alpha_final = other.alpha_final
        self.gamma_final = other.gamma_final
        self.message = other.message


def default_alpha(A, Y) -> float:
    """``max_n ||(A^T Y)_n||_2``; at this alpha ``Z = 0`` solves the group lasso."""
    g = A.T @ Y
    a = float(np.sqrt(np.einsum("ij,ij->i", g, g)).max(initial=0.0))
    return a if a > 0 else 1.0


def _sigma_max(config: SolverConfig, A, alpha: float, op_norm: float | None = None) -> float:
    if config.sigma_max is not None:
        return config.sigma_max
    nrm = np.linalg.norm(A, 2) if op_norm is None else op_norm
    return alpha / nrm**2 if nrm > 0 else 1.0


def _check_problem(A, Y, Z0=None):
    A = as_matrix(A, "A")
    Y = as_matrix(Y, "Y")
    if A.shape[0] != Y.shape[0]:
        raise InvalidInputError(f"A has {A.shape[0]} rows but Y has {Y.shape[0]}")
    if Z0 is not None:
        Z0 = as_matrix(Z0, "Z0")
        if Z0.shape != (A.shape[1], Y.shape[1]):
            raise InvalidInputError(
                f"Z0 must have shape {(A.shape[1], Y.shape[1])}, got {Z0.shape}"
            )
    return A, Y, Z0


def init_z0(A, Y, mode: str = "zero", rank_tol: float = RANK_TOL, rng=None) -> np.ndarray:
    """Starting point for the solver.

    ``"zero"`` returns the zero matrix. ``"lsq_fullrank"`` returns ``A^T Y``,
    perturbed by tiny Gaussian noise until it has full column rank (needed to
    start at ``gamma = 0``).
    """
    A, Y, _ = _check_problem(A, Y)
    N, K = A.shape[1], Y.shape[1]
    if mode == "zero":
        return np.zeros((N, K))
    if mode != "lsq_fullrank":
        raise InvalidInputError(f"unknown init mode {mode!r}")
    Z = A.T @ Y
    if compact_svd(Z, rank_tol).rank == K:
        return Z
    rng = np.random.default_rng(0) if rng is None else rng
    scale = np.linalg.norm(Z) / np.sqrt(N * K)
    scale = 1e-6 * (scale if scale > 0 else 1.0)
    for _ in range(100):
        Zp = Z + scale * rng.standard_normal((N, K))
        if compact_svd(Zp, rank_tol).rank == K:
            return Zp
    raise RankDeficiencyError(f"cannot build a full column rank start with N={N} < K={K}")


def init_state(A, Y, Z0, alpha: float, config: SolverConfig) -> SolverState:
    """Linearize at ``Z0``; raises :class:`RankDeficiencyError` at singular ``gamma = 0`` starts."""
    gw = build_weight(Z0, config.gamma, config.cond_cap)
    Lam = build_lambda(Z0, gw, config.zero_row_tol)
    J = objective(Z0, A, Y, alpha, config.gamma, config.rank_tol)
    return SolverState(Z0, gw, Lam, _sigma_max(config, A, alpha), J, 0)


def predicted_decrease(state: SolverState, G, Zplus) -> float:
    """``||Z+||_{W,1} - ||Z||_{W,1} + <G, Z+ - Z>_W`` for the frozen metric of ``state``.

    Never positive when ``Zplus`` is the proximal step from ``state``.
    """
    W = state.weight.W
    D = Zplus - state.Z
    return weighted_norm_change(state.Z, Zplus, W) + float(np.vdot(G @ W, D))


def armijo_step(
    state: SolverState, A, Y, alpha: float, config: SolverConfig, op_norm: float | None = None
):
    """One iteration with backtracking on the predicted decrease.

    ``op_norm`` is ``||A||_op`` if the caller has it, to skip recomputing it.

    Returns
    -------
    new_state : SolverState
    sigma : float
        Accepted step size.
    pred : float
        Predicted decrease of the accepted step.

    Raises
    ------
    LineSearchError
        If ``max_backtracks`` candidates are all rejected.
    """
    Z = state.Z
    gw = state.weight
    W, M, gamma = gw.W, gw.M, gw.gamma
    r = A @ Z - Y
    H = Z @ state.Lambda + A.T @ r / alpha
    G = H @ M
    ZW = Z if gamma == 1.0 else Z @ W
    a = np.sqrt(np.maximum(np.einsum("ij,ij->i", ZW, Z), 0.0))
    sigma = min(_sigma_max(config, A, alpha, op_norm), state.sigma_prev / config.beta)
    unit = gamma == 1.0
    for _ in range(config.max_backtracks):
        # Row shrinkage of V = Z - sigma G in the W metric (see prox_w).
        V = Z - sigma * G
        VW = V if unit else V @ W
        vn = np.sqrt(np.maximum(np.einsum("ij,ij->i", VW, V), 0.0))
        factor = 1.0 - sigma / np.maximum(vn, sigma)
        Zp = V * factor[:, None]
        D = Zp - Z
        if not D.any():
            return replace(state, sigma_prev=sigma, iter=state.iter + 1), sigma, 0.0
        ZpW = VW * factor[:, None]
        b = vn * factor
        # ||Z+||_{W,1} - ||Z||_{W,1} row by row as <d, z+ + z>_W / (|z+| + |z|).
        den = a + b
        pos = den > 0
        dnorm = float((np.einsum("ij,ij->i", ZpW - ZW, Zp + Z)[pos] / den[pos]).sum())
        pred = min(dnorm + float(np.vdot(H, D)), 0.0)
        try:
            Mp, Wp, cond = metric_arrays(Zp, gamma, config.cond_cap)
        except RankDeficiencyError:
            sigma *= config.beta
            continue
        # J(Z+) - J(Z) in difference form; subtracting two nearly equal
        # objective values loses all digits once steps get small.
        AD = A @ D
        dpsi = dnorm + metric_shift(Z, Zp, ZpW, b, Wp, gamma)
        dfit_lin = float(np.vdot(AD, r)) / alpha
        dfit_sq = float(np.vdot(AD, AD)) / (2.0 * alpha)
        dJ = dpsi + dfit_lin + dfit_sq
        # Rounding allowance proportional to the summands, hence to the step.
        tol = 64 * _EPS * (abs(dpsi) + abs(dfit_lin) + dfit_sq)
        if dJ <= config.kappa * pred + tol:
            gwp = GammaWeight(gamma, Mp, WeightMatrix.trusted(Wp, Mp), cond)
            Lp = build_lambda(Zp, gwp, config.zero_row_tol)
            return SolverState(Zp, gwp, Lp, sigma, state.J + dJ, state.iter + 1), sigma, pred
        sigma *= config.beta
    raise LineSearchError(
        f"no acceptable step after {config.max_backtracks} backtracks (last sigma={sigma:.3e})"
    )


def _finish(report: SolveReport, Z, A, Y, termination, alpha, gamma, message=""):
    report.Z_final = Z
    report.termination = termination
    report.fit_final = float(np.linalg.norm(A @ Z - Y))
    report.alpha_final = alpha
    report.gamma_final = gamma
    report.message = message
    return report


def solve_fixed(A, Y, Z0=None, config: SolverConfig | None = None, alpha: float | None = None) -> SolveReport:
    """Run the proximal iteration at fixed ``alpha`` and ``gamma``.

    Stops when ``-pred_k / sigma_k <= r_tol * J(Z_k)`` and returns ``Z_k``,
    the iterate certified by the test. Rank deficiency and line-search
    failure are reported through ``termination`` rather than raised.
    """
    config = config or SolverConfig()
    A, Y, Z0 = _check_problem(A, Y, Z0)
    if Z0 is None:
        Z0 = np.zeros((A.shape[1], Y.shape[1]))
    if alpha is None:
        alpha = config.alpha if config.alpha is not None else default_alpha(A, Y)
    if not alpha > 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    gamma = config.gamma
    report = SolveReport(
        Z0, 0, Termination.MAX_ITER, alpha_trace=[alpha], gamma_trace=[gamma], segment_starts=[0]
    )
    try:
        state = init_state(A, Y, Z0, alpha, config)
    except RankDeficiencyError as exc:
        return _finish(report, Z0, A, Y, Termination.RANK_DEFICIENCY, alpha, gamma, str(exc))
    report.J_trace.append(state.J)
    op_norm = float(np.linalg.norm(A, 2))

    for _ in range(config.max_iter):
        try:
            new, sigma, pred = armijo_step(state, A, Y, alpha, config, op_norm)
        except LineSearchError as exc:
            return _finish(report, state.Z, A, Y, Termination.LINE_SEARCH_FAILED, alpha, gamma, str(exc))
        if -pred / sigma <= config.r_tol * state.J:
            report.iterations = state.iter
            return _finish(report, state.Z, A, Y, Termination.TOLERANCE_MET, alpha, gamma)
        report.J_trace.append(new.J)
        report.pred_trace.append(pred)
        report.sigma_trace.append(sigma)
        state = new
    report.iterations = state.iter
    return _finish(report, state.Z, A, Y, Termination.MAX_ITER, alpha, gamma)


def _unchanged(Znew, Zold) -> bool:
    return np.linalg.norm(Znew - Zold) <= 1e-10 * (1.0 + np.linalg.norm(Zold))


def solve_discrepancy(
    A,
    Y,
    delta: float,
    config: SolverConfig | None = None,
    tau1: float = 0.9,
    tau2: float = 1.1,
    Z0=None,
    alpha0: float | None = None,
) -> SolveReport:
    """Adapt ``alpha`` until ``tau1*delta <= ||A Z - Y|| <= tau2*delta``.

    Each probe solves to the stopping tolerance, warm-started from the
    previous probe. ``alpha`` is divided by ``alpha_factor`` while the fit is
    too large and multiplied while it is too small (or, in secant mode,
    scaled by ``target / fit`` within ``secant_cap``); whenever the direction
    reverses the factor or cap is replaced by its square root. At ``gamma = 0`` the
    search also ends (``guard_terminated``) once the upper bound holds, the
    last update increased ``alpha`` and the iterate did not move. A probe
    that exhausts ``max_iter`` ends the search with ``max_iter``.
    """
    config = config or SolverConfig()
    if not delta > 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")
    if not 0 < tau1 <= 1 < tau2:
        raise InvalidInputError("need 0 < tau1 <= 1 < tau2")
    A, Y, Z0 = _check_problem(A, Y, Z0)
    if Z0 is None:
        Z0 = np.zeros((A.shape[1], Y.shape[1]))
    alpha = alpha0 if alpha0 is not None else (
        config.alpha if config.alpha is not None else default_alpha(A, Y)
    )
    lo, hi = tau1 * delta, tau2 * delta
    secant = config.alpha_update == "secant"
    factor = config.secant_cap if secant else config.alpha_factor
    last_dir = 0
    report = None
    Z = Z0
    feasible = None

    for _ in range(config.max_alpha_updates):
        sub = solve_fixed(A, Y, Z, config, alpha=alpha)
        if report is None:
            report = sub
        else:
            report.extend(sub)
        if sub.failed:
            return report
        if sub.termination == Termination.MAX_ITER:
            # The probe did not converge, so its fit says nothing reliable
            # about which way alpha should move.
            report.message = f"alpha search stopped: probe at alpha={alpha:.3e} hit max_iter"
            return report
        fit = sub.fit_final
        Zprev, Z = Z, sub.Z_final
        if fit <= hi:
            feasible = (Z, alpha)
        log.debug("alpha=%.3e fit=%.3e target=[%.3e, %.3e]", alpha, fit, lo, hi)
        if lo <= fit <= hi:
            report.termination = Termination.DISCREPANCY_MET
            return report
        if config.gamma == 0.0 and fit <= hi and last_dir > 0 and _unchanged(Z, Zprev):
            report.termination = Termination.GUARD_TERMINATED
            return report
        direction = -1 if fit > hi else 1
        if last_dir and direction != last_dir:
            factor = np.sqrt(factor)
            if factor < 1.0 + 1e-6:
                break
        last_dir = direction
        if secant:
            ratio = np.sqrt(lo * hi) / fit if fit > 0 else factor
            alpha *= min(max(ratio, 1.0 / factor), factor)
        else:
            alpha = alpha / factor if direction < 0 else alpha * factor
        if not ALPHA_MIN <= alpha <= ALPHA_MAX:
            report.message = f"alpha left [{ALPHA_MIN:g}, {ALPHA_MAX:g}]"
            break

    if feasible is not None and feasible[0] is not report.Z_final:
        Zf, af = feasible
        report.Z_final = Zf
        report.alpha_final = af
        report.fit_final = float(np.linalg.norm(A @ Zf - Y))
    report.termination = Termination.ADAPTATION_FAILED
    report.message = report.message or "alpha adaptation did not meet the discrepancy band"
    return report


def solve_continuation(
    A,
    Y,
    delta: float,
    config: SolverConfig | None = None,
    gamma_factor: float = 0.1,
    gamma_steps: int = 4,
    tau1: float = 0.9,
    tau2: float = 1.1,
    final_gamma_zero: bool = True,
    coarse_rel: float = 1e-2,
) -> SolveReport:
    """Follow ``gamma_l = gamma_factor**l`` from the group lasso down to ``gamma = 0``.

    Stage 0 (``gamma = 1``) starts from zero with the discrepancy driver;
    later stages warm-start ``Z`` and ``alpha`` from the previous one.
    Stages with ``gamma > 0`` only aim at the looser residual
    ``max(delta, coarse_rel * ||Y||)``: they exist to pick the support, and
    driving the convex-ish stages to a tiny ``delta`` costs many iterations
    without changing it. The last stage always targets ``delta``. The
    final ``gamma = 0`` stage needs a full column rank iterate: when the
    iterate is rank deficient (relative to ``cond_cap``) the problem is
    reduced to the iterate's row space first and the solution expanded back.
    """
    from .reduction import expand_solution

    config = config or SolverConfig()
    if not 0.0 < gamma_factor < 1.0:
        raise InvalidInputError("gamma_factor must lie in (0, 1)")
    if gamma_steps < 1:
        raise InvalidInputError("gamma_steps must be at least 1")
    if coarse_rel < 0:
        raise InvalidInputError("coarse_rel must be nonnegative")
    A, Y, _ = _check_problem(A, Y)
    stage_delta = max(delta, coarse_rel * float(np.linalg.norm(Y)))
    alpha = config.alpha if config.alpha is not None else default_alpha(A, Y)
    Z = np.zeros((A.shape[1], Y.shape[1]))
    report = None

    for l in range(gamma_steps + 1):
        cfg = replace(config, gamma=gamma_factor**l)
        last = l == gamma_steps and not final_gamma_zero
        sub = solve_discrepancy(A, Y, delta if last else stage_delta, cfg, tau1, tau2, Z0=Z, alpha0=alpha)
        if report is None:
            report = sub
        else:
            report.extend(sub)
        if sub.failed and sub.termination != Termination.ADAPTATION_FAILED:
            report.message = f"stage {l} (gamma={cfg.gamma:g}): {sub.message}"
            return report
        Z, alpha = sub.Z_final, sub.alpha_final

    if not final_gamma_zero:
        return report

    cfg = replace(config, gamma=0.0)
    # Columns whose singular value falls below sigma_max / sqrt(cond_cap)
    # would make Z^T Z violate the conditioning cap.
    svd = compact_svd(Z, 1.0 / np.sqrt(config.cond_cap))
    K = Y.shape[1]
    if svd.rank == K:
        sub = solve_discrepancy(A, Y, delta, cfg, tau1, tau2, Z0=Z, alpha0=alpha)
    elif svd.rank == 0:
        report.message = "final iterate is zero; skipping gamma = 0 stage"
        return report
    else:
        Q = svd.Vt
        Yr = Y @ Q.T
        perp = np.linalg.norm(Y - Yr @ Q)
        delta_r = np.sqrt(max(delta**2 - perp**2, (1e-3 * delta) ** 2))
        sub = solve_discrepancy(A, Yr, delta_r, cfg, tau1, tau2, Z0=Z @ Q.T, alpha0=alpha)
        sub.Z_final = expand_solution(sub.Z_final, Q)
        sub.fit_final = float(np.linalg.norm(A @ sub.Z_final - Y))
    report.extend(sub)
    if sub.failed and sub.termination != Termination.ADAPTATION_FAILED:
        report.message = f"stage {gamma_steps + 1} (gamma=0): {sub.message}"
    return report

"""Synthetic joint-sparse recovery experiments.

A trial draws a Gaussian dictionary ``A`` (entry variance ``1/sqrt(M)``), an
``s``-row-sparse rank-``r`` signal ``X`` and optional Gaussian noise scaled so
that ``E||noise||_Fro ~= noise_norm``, then solves with gamma-continuation and
checks whether the pruned row support of the solution equals the truth.

Every trial derives its random streams from ``(seed, sweep_value, trial)``
through :class:`numpy.random.SeedSequence`, so results do not depend on the
order or the number of worker threads.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InvalidInputError, OwlError
from .linalg import compact_svd, row_norms
from .reduction import select_features
from .solver import NOISELESS_DELTA, SolverConfig, solve_continuation

__all__ = [
    "SynthSpec",
    "TrialOutcome",
    "SweepRow",
    "SweepResult",
    "gen_dictionary",
    "gen_signal",
    "add_noise",
    "support_success",
    "trial_seed",
    "make_instance",
    "run_trial",
    "run_sweep",
    "resolve_threads",
    "SWEEP_HEADER",
]

SWEEP_HEADER = ("sweep_value", "recovery_rate", "mean_rmse", "mean_iters", "mean_time")


@dataclass(frozen=True)
class SynthSpec:
    """Problem sizes of a synthetic experiment.

    ``N`` dictionary columns, ``M`` measurements, ``K`` signal columns,
    ``s`` nonzero rows, signal rank ``r``.
    """

    N: int = 128
    M: int = 51
    K: int = 30
    s: int = 30
    r: int = 10
    noise_norm: float = 0.0
    trials: int = 40
    seed: int = 0

    def __post_init__(self):
        if min(self.N, self.M, self.K, self.s, self.r) < 1:
            raise InvalidInputError("N, M, K, s, r must be positive")
        if not (self.r <= self.s <= self.N and self.r <= self.K):
            raise InvalidInputError(
                f"need r <= s <= N and r <= K (got N={self.N}, K={self.K}, s={self.s}, r={self.r})"
            )
        if self.noise_norm < 0:
            raise InvalidInputError("noise_norm must be nonnegative")
        if self.trials < 0:
            raise InvalidInputError("trials must be nonnegative")


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    rmse: float
    iterations: int
    wall_time: float
    termination: str = ""
    seed: int = 0


@dataclass(frozen=True)
class SweepRow:
    sweep_value: int
    recovery_rate: float
    mean_rmse: float
    mean_iters: float
    mean_time: float
    mean_rmse_success: float = float("nan")

    def as_tuple(self):
        return (self.sweep_value, self.recovery_rate, self.mean_rmse, self.mean_iters, self.mean_time)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    trials: dict = field(default_factory=dict)


def gen_dictionary(M: int, N: int, seed=None) -> np.ndarray:
    """``M x N`` matrix with i.i.d. ``N(0, 1/sqrt(M))`` entries (variance ``1/sqrt(M)``)."""
    if M < 1 or N < 1:
        raise InvalidInputError("M and N must be positive")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, M ** -0.25, size=(M, N))


def gen_signal(spec: SynthSpec, seed=None, max_attempts: int = 100):
    """Random ``s``-row-sparse signal of rank exactly ``r``.

    Rows on a uniformly drawn support are ``B @ C`` with standard normal
    factors ``B`` (``s x r``) and ``C`` (``r x K``).

    Returns
    -------
    X : ndarray
    support : tuple of int
        Sorted support indices.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        support = np.sort(rng.choice(spec.N, spec.s, replace=False))
        XS = rng.standard_normal((spec.s, spec.r)) @ rng.standard_normal((spec.r, spec.K))
        norms = row_norms(XS)
        if compact_svd(XS).rank == spec.r and np.all(norms > 1e-10 * norms.max()):
            X = np.zeros((spec.N, spec.K))
            X[support] = XS
            return X, tuple(int(i) for i in support)
    raise OwlError(f"could not draw a rank-{spec.r}, {spec.s}-sparse signal")


def add_noise(Y, noise_norm: float, seed=None) -> np.ndarray:
    """Add Gaussian noise with per-entry standard deviation ``noise_norm / sqrt(M K)``."""
    if noise_norm < 0:
        raise InvalidInputError("noise_norm must be nonnegative")
    Y = np.asarray(Y, dtype=float)
    if noise_norm == 0:
        return Y.copy()
    rng = np.random.default_rng(seed)
    return Y + rng.normal(0.0, noise_norm / np.sqrt(Y.size), size=Y.shape)


def support_success(Z, true_support, prune_rel: float = 1e-6) -> bool:
    """True iff the pruned support of ``Z`` equals ``true_support`` exactly."""
    return set(select_features(Z, prune_rel).indices) == {int(i) for i in true_support}


def trial_seed(seed: int, sweep_value: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & (2**64 - 1), int(sweep_value), int(trial)])


def make_instance(spec: SynthSpec, seed):
    """Draw ``(A, Y, X, support)`` from independent child streams of ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_dict, s_sig, s_noise = ss.spawn(3)
    A = gen_dictionary(spec.M, spec.N, s_dict)
    X, support = gen_signal(spec, s_sig)
    Y = add_noise(A @ X, spec.noise_norm, s_noise)
    return A, Y, X, support


def run_trial(
    spec: SynthSpec,
    seed,
    config: SolverConfig | None = None,
    delta: float | None = None,
    prune_rel: float = 1e-6,
    **solve_kwargs,
) -> TrialOutcome:
    """Solve one synthetic instance; solver errors count as failures."""
    A, Y, X, support = make_instance(spec, seed)
    if delta is None:
        delta = spec.noise_norm if spec.noise_norm > 0 else NOISELESS_DELTA
    t0 = time.perf_counter()
    try:
        rep = solve_continuation(A, Y, delta, config, **solve_kwargs)
    except OwlError as exc:
        return TrialOutcome(False, float("nan"), 0, time.perf_counter() - t0, f"error: {exc}")
    elapsed = time.perf_counter() - t0
    Z = rep.Z_final
    rmse = float(np.linalg.norm(Z - X) / np.sqrt(X.size))
    ok = support_success(Z, support, prune_rel)
    return TrialOutcome(ok, rmse, rep.iterations, elapsed, str(rep.termination))


def resolve_threads(threads: int | None) -> int:
    """Explicit value, else ``OWL_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("OWL_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def _nanmean(xs):
    xs = [x for x in xs if np.isfinite(x)]
    return float(np.mean(xs)) if xs else float("nan")


def run_sweep(
    spec_base: SynthSpec,
    sweep: str,
    values,
    config: SolverConfig | None = None,
    threads: int | None = None,
    timing: bool = True,
    delta: float | None = None,
    **solve_kwargs,
) -> SweepResult:
    """Recovery statistics over a rank or measurement sweep.

    Parameters
    ----------
    sweep : {"rank", "measurements"}
        Which field of ``spec_base`` (``r`` or ``M``) takes the ``values``.
    timing : bool
        Record wall times; ``False`` reports zeros so output is reproducible
        byte for byte.
    """
    if sweep not in ("rank", "measurements"):
        raise InvalidInputError(f"sweep must be 'rank' or 'measurements', got {sweep!r}")
    values = sorted(int(v) for v in values)
    specs = {}
    for v in values:
        specs[v] = replace(spec_base, r=v) if sweep == "rank" else replace(spec_base, M=v)

    jobs = [(v, t) for v in values for t in range(spec_base.trials)]

    def work(job):
        v, t = job
        ss = trial_seed(spec_base.seed, v, t)
        out = run_trial(specs[v], ss, config, delta, **solve_kwargs)
        return replace(
            out,
            wall_time=out.wall_time if timing else 0.0,
            seed=int(ss.generate_state(1, np.uint64)[0]),
        )

    n = resolve_threads(threads)
    if n == 1:
        outcomes = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            outcomes = list(pool.map(work, jobs))

    result = SweepResult()
    for v in values:
        trials = [o for (jv, _), o in zip(jobs, outcomes) if jv == v]
        result.trials[v] = trials
        if not trials:
            result.rows.append(SweepRow(v, float("nan"), float("nan"), float("nan"), float("nan")))
            continue
        result.rows.append(
            SweepRow(
                v,
                sum(o.success for o in trials) / len(trials),
                _nanmean([o.rmse for o in trials]),
                float(np.mean([o.iterations for o in trials])),
                float(np.mean([o.wall_time for o in trials])),
                _nanmean([o.rmse for o in trials if o.success]),
            )
        )
    return result

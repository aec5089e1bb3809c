"""Command-line entry point: ``solve``, ``synth`` and ``features``.

Exit codes: 0 on success, 1 on usage or input errors, 2 when the solver
reports a failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import io
from .exceptions import InvalidInputError, OwlError
from .features import select_columns
from .harness import SWEEP_HEADER, SynthSpec, resolve_threads, run_sweep
from .reduction import select_features
from .solver import (
    SolverConfig,
    solve_continuation,
    solve_discrepancy,
    solve_fixed,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2

log = logging.getLogger("owlmmv")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; 2 is reserved for
    # solver failures here.
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--gamma", type=float, default=None, help="relaxation parameter (without --continuation)")
    g.add_argument("--alpha", type=float, default=None, help="regularization weight / initial alpha")
    g.add_argument("--kappa", type=float, default=0.1)
    g.add_argument("--beta", type=float, default=0.5)
    g.add_argument("--max-iter", type=int, default=5000)
    g.add_argument("--rtol", type=float, default=1e-6)
    g.add_argument("--tau1", type=float, default=0.9)
    g.add_argument("--tau2", type=float, default=1.1)
    g.add_argument("--gamma-factor", type=float, default=0.1)
    g.add_argument("--gamma-steps", type=int, default=4)
    g.add_argument("--alpha-update", choices=("geometric", "secant"), default="geometric",
                   help="alpha search rule of the discrepancy driver")
    g.add_argument("--alpha-factor", type=float, default=2.0, help="geometric alpha factor")
    g.add_argument("--secant-cap", type=float, default=8.0, help="largest alpha ratio per secant update")


def _config(args, gamma=None) -> SolverConfig:
    return SolverConfig(
        gamma=1.0 if gamma is None else gamma,
        alpha=args.alpha,
        kappa=args.kappa,
        beta=args.beta,
        r_tol=args.rtol,
        max_iter=args.max_iter,
        alpha_factor=args.alpha_factor,
        alpha_update=args.alpha_update,
        secant_cap=args.secant_cap,
    )


def _continuation_kwargs(args) -> dict:
    return dict(
        gamma_factor=args.gamma_factor,
        gamma_steps=args.gamma_steps,
        tau1=args.tau1,
        tau2=args.tau2,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="owlmmv", description="Joint sparse recovery with the owl21 regularizer.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="recover a row-sparse Z with A Z ~= Y")
    p.add_argument("--dict", required=True, dest="dict_path", help="dictionary A (CSV, M x N)")
    p.add_argument("--obs", required=True, help="observations Y (CSV, M x K)")
    p.add_argument("--delta", type=float, default=None, help="noise level for the discrepancy principle")
    p.add_argument("--continuation", action="store_true", help="gamma-continuation from 1 down to 0")
    p.add_argument("--out", required=True, help="solution Z (CSV)")
    p.add_argument("--report", default=None, help="JSON report path")
    p.add_argument("--prune", type=float, default=1e-6, help="relative row pruning threshold")
    p.add_argument("--skip-header", action="store_true", help="ignore the first line of input CSVs")
    _add_solver_flags(p)

    p = sub.add_parser("synth", help="synthetic recovery sweep")
    p.add_argument("--sweep", choices=("rank", "measurements"), required=True)
    p.add_argument("--values", default=None, help="sweep values: 'a,b,c' or 'lo:hi[:step]' (inclusive)")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--m", type=int, default=51)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--s", type=int, default=30)
    p.add_argument("--r", type=int, default=10)
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.0, help="expected Frobenius norm of the noise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $OWL_THREADS or 1)")
    p.add_argument("--out", required=True)
    p.add_argument("--per-trial", default=None, help="also write one CSV row per trial here")
    p.add_argument("--no-timing", action="store_true", help="report zero times for byte-identical output")
    _add_solver_flags(p)

    p = sub.add_parser("features", help="column subset selection by self-representation")
    p.add_argument("--data", required=True, help="data matrix (CSV, samples x features)")
    p.add_argument("--tol", type=float, default=1e-6, help="relative reconstruction tolerance")
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None, help="JSON report path")
    p.add_argument("--prune", type=float, default=1e-6)
    p.add_argument("--skip-header", action="store_true")
    _add_solver_flags(p)
    return parser


def parse_values(text: str) -> list:
    """Parse ``'1,5,10'`` or ``'lo:hi[:step]'`` (inclusive) into integers."""
    try:
        if ":" in text:
            parts = [int(t) for t in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1
            if step < 1 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InvalidInputError(f"bad --values specification {text!r}") from None


def _cmd_solve(args) -> int:
    A = io.read_matrix(args.dict_path, args.skip_header)
    Y = io.read_matrix(args.obs, args.skip_header)
    if args.continuation:
        if args.delta is None:
            raise InvalidInputError("--continuation needs --delta")
        rep = solve_continuation(A, Y, args.delta, _config(args), **_continuation_kwargs(args))
    elif args.delta is not None:
        rep = solve_discrepancy(
            A, Y, args.delta, _config(args, args.gamma), tau1=args.tau1, tau2=args.tau2
        )
    else:
        rep = solve_fixed(A, Y, config=_config(args, args.gamma))
    io.write_matrix(args.out, rep.Z_final)
    ranking = select_features(rep.Z_final, args.prune)
    if args.report:
        io.write_report(args.report, rep, ranking)
    log.info("termination=%s iterations=%d fit=%.3e", rep.termination, rep.iterations, rep.fit_final)
    if rep.failed:
        print(f"solver failed: {rep.termination}: {rep.message}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        N=args.n,
        M=args.m,
        K=args.k,
        s=args.s,
        # A rank sweep overrides r, so the base value only has to be admissible.
        r=min(args.r, args.s, args.k) if args.sweep == "rank" else args.r,
        noise_norm=args.noise,
        trials=args.trials,
        seed=args.seed,
    )
    if args.values is not None:
        values = parse_values(args.values)
    elif args.sweep == "rank":
        values = list(range(1, min(spec.s, spec.K) + 1))
    else:
        values = list(range(30, 91, 10))
    if not values:
        raise InvalidInputError("empty sweep")
    res = run_sweep(
        spec,
        args.sweep,
        values,
        _config(args),
        threads=resolve_threads(args.threads),
        timing=not args.no_timing,
        **_continuation_kwargs(args),
    )
    header = list(SWEEP_HEADER)
    rows = [list(r.as_tuple()) for r in res.rows]
    if args.per_trial:
        # Success-only mean RMSE is only meaningful next to the per-trial log.
        header.append("mean_rmse_success")
        for row, r in zip(rows, res.rows):
            row.append(r.mean_rmse_success)
        trial_rows = [
            (v, t, o.seed, int(o.success), o.rmse, o.iterations, o.wall_time, o.termination)
            for v in sorted(res.trials)
            for t, o in enumerate(res.trials[v])
        ]
        io.write_table(
            args.per_trial,
            ("sweep_value", "trial", "seed", "success", "rmse", "iterations", "wall_time", "termination"),
            trial_rows,
        )
    io.write_table(args.out, header, rows)
    return EXIT_OK


def _cmd_features(args) -> int:
    data = io.read_matrix(args.data, args.skip_header)
    sel = select_columns(
        data, args.tol, _config(args), prune_rel=args.prune, **_continuation_kwargs(args)
    )
    io.write_table(args.out, ("rank", "feature_index", "score", "rmse_cumulative"), sel.rows())
    if args.report:
        io.write_report(args.report, sel.report, sel.ranking)
    if sel.report.failed:
        print(f"solver failed: {sel.report.termination}: {sel.report.message}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


_COMMANDS = {"solve": _cmd_solve, "synth": _cmd_synth, "features": _cmd_features}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OwlError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

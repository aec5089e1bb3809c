"""CSV matrix files and JSON solve reports.

Matrix CSV: one row per line, comma separated decimal floats, ``.`` as the
decimal separator, LF line endings, no header unless ``skip_header`` is set.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import CsvParseError

__all__ = ["read_matrix", "write_matrix", "write_table", "write_report", "REPORT_KEYS"]

REPORT_KEYS = (
    "iterations",
    "objective",
    "fit",
    "alpha_trace",
    "gamma_trace",
    "termination",
    "support",
    "scores",
)


def read_matrix(path, skip_header: bool = False) -> np.ndarray:
    """Parse a dense matrix CSV file.

    Raises
    ------
    CsvParseError
        On ragged rows, non-numeric or non-finite fields, or an empty file;
        the message carries the 1-based line number.
    """
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if skip_header and lineno == 1:
                continue
            if not rec or all(not f.strip() for f in rec):
                continue
            try:
                vals = [float(f) for f in rec]
            except ValueError as exc:
                raise CsvParseError(f"non-numeric field ({exc})", lineno, path) from None
            if not all(np.isfinite(vals)):
                raise CsvParseError("non-finite value", lineno, path)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise CsvParseError(f"expected {width} fields, found {len(vals)}", lineno, path)
            rows.append(vals)
    if not rows:
        raise CsvParseError("no data rows", None, path)
    return np.array(rows, dtype=float)


def write_matrix(path, X) -> None:
    # Adding 0.0 turns -0.0 into 0.0.
    X = np.atleast_2d(np.asarray(X, dtype=float)) + 0.0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in X:
            w.writerow([repr(float(v)) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_table(path, header, rows) -> None:
    """Write a headed CSV table (floats in shortest round-trip form)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def report_dict(report, ranking) -> dict:
    """JSON-ready summary of a :class:`~owlmmv.solver.SolveReport`."""
    return {
        "iterations": int(report.iterations),
        "objective": float(report.objective),
        "fit": float(report.fit_final),
        "alpha_trace": [float(a) for a in report.alpha_trace],
        "gamma_trace": [float(g) for g in report.gamma_trace],
        "termination": str(report.termination),
        "support": [int(i) for i in ranking.indices],
        "scores": [float(s) for s in ranking.scores],
    }


def write_report(path, report, ranking) -> dict:
    data = report_dict(report, ranking)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
    return data

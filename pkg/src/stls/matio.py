"""Matrix and record file I/O: comment-tolerant CSV and MatrixMarket."""

from __future__ import annotations

import numpy as np
import scipy.io

from .model import StlsError

_MM_FORMATS = {"array", "coordinate"}
_MM_FIELDS = {"real", "integer"}
_MM_SYMMETRIES = {"general", "symmetric", "skew-symmetric"}


class MatrixParseError(StlsError):
    """Unparseable matrix file; `line` is the offending 1-based line when known."""

    category = "parse-error"

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def read_matrix(path):
    """Read a dense real matrix from CSV (optional '#' comment lines) or MatrixMarket.

    MatrixMarket is detected by the '%%MatrixMarket' banner or a .mtx suffix;
    only real/integer array and coordinate files are accepted.  CSV rows must
    be comma-separated floats of equal length; violations are reported with
    their line number.
    """
    path = str(path)
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("%%MatrixMarket") or path.lower().endswith(".mtx"):
        return _read_matrix_market(path, first)
    return _read_csv(path)


def _read_matrix_market(path, first):
    tokens = first.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise MatrixParseError(f"malformed MatrixMarket banner: {first.strip()!r}", line=1)
    fmt, field, symmetry = tokens[2], tokens[3], tokens[4]
    if fmt not in _MM_FORMATS or field not in _MM_FIELDS or symmetry not in _MM_SYMMETRIES:
        raise MatrixParseError(
            f"unsupported MatrixMarket type 'matrix {fmt} {field} {symmetry}'", line=1
        )
    try:
        a = scipy.io.mmread(path)
    except Exception as exc:
        raise MatrixParseError(f"MatrixMarket read failed: {exc}") from exc
    if hasattr(a, "toarray"):
        a = a.toarray()
    return np.asarray(a, dtype=float)


def _read_csv(path):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split(",")
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise MatrixParseError(f"could not parse row {text!r} as floats", line=lineno)
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise MatrixParseError(
                    f"ragged row: expected {width} columns, got {len(vals)}", line=lineno
                )
            rows.append(vals)
    if not rows:
        raise MatrixParseError("no data rows found")
    return np.asarray(rows, dtype=float)


def write_matrix(path, a, header=None):
    """Write a matrix as CSV with 17 significant digits (round-trips float64)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        for row in a:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

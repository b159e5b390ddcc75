"""Report emission: log-log slope fits and versioned, reproducible CSV files.

Reports are byte-deterministic for a given config: no timestamps or machine
metadata go into the files (wall-clock belongs on stdout), and every data row
carries the canonical config echo that produced it.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

__all__ = ["SCHEMA_TAG", "FitResult", "fit_slope", "config_echo", "write_csv"]

SCHEMA_TAG = "mikado-lab/1"


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float


def fit_slope(mus, values) -> FitResult:
    """Ordinary least squares of log(value) against log(mu).

    Needs at least three points (two leave no residual degrees of freedom for
    the standard error) and strictly positive data on both axes.
    """
    mus = np.asarray(mus, dtype=float)
    values = np.asarray(values, dtype=float)
    if mus.shape != values.shape or mus.ndim != 1:
        raise ValueError("mus and values must be equal-length 1-d sequences")
    if mus.size < 3:
        raise ValueError(f"slope fit needs at least 3 points, got {mus.size}")
    if np.any(mus <= 0) or np.any(values <= 0):
        raise ValueError("slope fit needs strictly positive mus and values")
    x = np.log(mus)
    y = np.log(values)
    xm = x - x.mean()
    sxx = float(np.dot(xm, xm))
    if sxx == 0.0:
        raise ValueError("slope fit needs at least two distinct mus")
    slope = float(np.dot(xm, y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    variance = float(np.dot(resid, resid)) / (mus.size - 2)
    return FitResult(slope=slope, intercept=intercept, stderr=math.sqrt(variance / sxx))


def config_echo(params: dict) -> str:
    """Canonical one-token echo of the run parameters, stable across runs."""
    parts = []
    for key in sorted(params):
        value = params[key]
        if isinstance(value, float):
            value = repr(float(value))  # plain repr even for numpy scalars
        parts.append(f"{key}={value}")
    return ";".join(parts)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, bool):
        return str(int(value))
    return str(value)


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    """Write a schema-tagged CSV atomically (temp file, then rename)."""
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["schema", SCHEMA_TAG])
            writer.writerow(header)
            for row in rows:
                writer.writerow([_format_cell(cell) for cell in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

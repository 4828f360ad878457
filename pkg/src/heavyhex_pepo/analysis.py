"""Bond-dimension extrapolation and cross-method error reports."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .results import Row

NEAR_ZERO = 1e-12


class UnfitError(ValueError):
    """The series cannot be represented by ``b * exp(-a / chi)``."""


class KeyMismatchError(KeyError):
    pass


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    residual: float

    def predict(self, chi: float | np.ndarray) -> float | np.ndarray:
        return self.b * np.exp(-self.a / np.asarray(chi, dtype=float))


def fit_chi_extrapolation(points: Sequence[tuple[float, float]]) -> FitResult:
    """Fit ``value = b * exp(-a / chi)``; ``b`` is the ``chi -> inf`` estimate.

    A straight-line fit of ``log|value|`` against ``1/chi`` seeds a
    Levenberg-Marquardt least-squares refinement on the original scale.

    Raises:
        UnfitError: fewer than 3 points, repeated chi, or values that are
            not all of one strict sign (including values near zero).
    """
    if len(points) < 3:
        raise UnfitError("need at least 3 points")
    chi = np.array([p[0] for p in points], dtype=float)
    val = np.array([p[1] for p in points], dtype=float)
    if len(set(chi.tolist())) != len(chi):
        raise UnfitError("chi values must be distinct")
    if np.any(chi <= 0) or not np.all(np.isfinite(val)):
        raise UnfitError("chi must be positive and values finite")
    if np.any(np.abs(val) <= NEAR_ZERO) or not (np.all(val > 0) or np.all(val < 0)):
        raise UnfitError("values must all share one strict sign")

    sign = 1.0 if val[0] > 0 else -1.0
    slope, intercept = np.polyfit(1.0 / chi, np.log(np.abs(val)), 1)
    x0 = np.array([-slope, sign * math.exp(intercept)])
    if abs(x0[0]) < 1e-14:
        x0[0] = 0.0

    def resid(p):
        return p[1] * np.exp(-p[0] / chi) - val

    def jac(p):
        e = np.exp(-p[0] / chi)
        return np.column_stack([-p[1] * e / chi, e])

    sol = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    a, b = (float(v) for v in sol.x)
    if not math.isfinite(b):
        raise UnfitError("fit diverged")
    rms = float(np.sqrt(np.mean(resid(sol.x) ** 2)))
    return FitResult(a, b, rms)


# -- error reports ---------------------------------------------------------


def _key(row: Row) -> tuple:
    return (float(row["theta"]), str(row["observable"]), int(row["steps"]), bool(row["extra_rx"]))


def method_label(row: Row) -> str:
    param = row.get("param") or ""
    return f"{row['method']}:{param}" if param else str(row["method"])


@dataclass
class ErrorReport:
    points: list[dict] = field(default_factory=list)
    summary: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "theta", "observable", "steps", "extra_rx", "reference", "value", "abs_error"])
        for p in self.points:
            writer.writerow(
                [
                    p["method"],
                    f"{p['theta']:.17g}",
                    p["observable"],
                    p["steps"],
                    int(p["extra_rx"]),
                    f"{p['reference']:.17g}",
                    f"{p['value']:.17g}",
                    f"{p['abs_error']:.17g}",
                ]
            )
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "points", "max_abs_error", "mean_abs_error"])
        for name, s in self.summary.items():
            writer.writerow([name, int(s["points"]), f"{s['max']:.17g}", f"{s['mean']:.17g}"])
        return buf.getvalue()


def error_report(reference: Iterable[Row], candidates: Iterable[Iterable[Row]]) -> ErrorReport:
    """Absolute error of every candidate row against the reference row with the same key.

    Rows are matched on ``(theta, observable, steps, extra_rx)`` and grouped
    per method (``method:param``).
    """
    ref: dict[tuple, float] = {}
    for row in reference:
        ref[_key(row)] = float(row["value"])
    report = ErrorReport()
    grouped: dict[str, list[float]] = defaultdict(list)
    for table in candidates:
        for row in table:
            k = _key(row)
            if k not in ref:
                raise KeyMismatchError(f"no reference value for {k}")
            err = abs(float(row["value"]) - ref[k])
            name = method_label(row)
            grouped[name].append(err)
            report.points.append(
                {
                    "method": name,
                    "theta": k[0],
                    "observable": k[1],
                    "steps": k[2],
                    "extra_rx": k[3],
                    "reference": ref[k],
                    "value": float(row["value"]),
                    "abs_error": err,
                }
            )
    for name, errs in grouped.items():
        report.summary[name] = {"points": len(errs), "max": max(errs), "mean": math.fsum(errs) / len(errs)}
    return report

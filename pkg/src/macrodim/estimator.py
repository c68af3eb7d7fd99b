"""Macroscopic Minkowski dimension from shell or ball occupancy counts.

The limsup over shells is replaced at finite ``n`` by an aggregate over a fit
window of per-shell exponents ``Log_+(count_n) / n`` (base 2, floored at 2).
Two aggregates are supported:

``max``
    the finite-n surrogate of the limsup; robust for lacunary sets, but it
    carries an ``O(log2(C) / n)`` bias when counts behave like ``C 2**(n D)``.
``slope``
    least-squares slope of ``Log_+(count_n)`` against ``n``; insensitive to
    the prefactor ``C``.

Both are always computed; ``value`` holds the requested one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import ShellCounts

__all__ = [
    "DimEstimate",
    "log_plus",
    "default_window",
    "estimate_dim",
    "estimate_dim_ball",
    "estimate_dim_shell",
]

AGGREGATES = ("max", "slope")


def log_plus(y):
    """``Log_+(y) = log2(max(y, 2))``."""
    return np.log2(np.maximum(np.asarray(y, dtype=np.float64), 2.0))


def default_window(n_max: int) -> tuple[int, int]:
    """Top half of the available shells, never starting below shell 2."""
    lo = max(2, math.ceil(n_max / 2))
    return (min(lo, n_max), n_max)


@dataclass
class DimEstimate:
    value: float
    method: str
    fit_window: tuple[int, int]
    per_shell_exponents: list[float]
    aggregate: str = "max"
    max_exponent: float = float("nan")
    slope_fit: dict | None = field(default=None)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "aggregate": self.aggregate,
            "fit_window": list(self.fit_window),
            "per_shell_exponents": self.per_shell_exponents,
            "max_exponent": self.max_exponent,
            "slope_fit": self.slope_fit,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "DimEstimate":
        return cls(
            value=obj["value"],
            method=obj["method"],
            fit_window=tuple(obj["fit_window"]),
            per_shell_exponents=list(obj["per_shell_exponents"]),
            aggregate=obj.get("aggregate", "max"),
            max_exponent=obj.get("max_exponent", float("nan")),
            slope_fit=obj.get("slope_fit"),
        )


def _slope_fit(ns, logs):
    if len(ns) < 2:
        return None
    A = np.vstack([ns, np.ones_like(ns)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, logs, rcond=None)
    resid = logs - (slope * ns + intercept)
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "rms_residual": float(np.sqrt(np.mean(resid**2))),
    }


def estimate_dim(
    values,
    method: str,
    fit_window: tuple[int, int] | None = None,
    aggregate: str = "max",
    d: int | None = None,
) -> DimEstimate:
    """Dimension estimate from a vector of counts indexed by shell.

    ``values[n]`` is a ball count (``method="ball"``) or a shell count
    (``method="shell"``).  The window is inclusive and must lie in
    ``[1, n_max]``.  When ``d`` is given the value is clamped to ``[0, d]``.
    """
    if aggregate not in AGGREGATES:
        raise ValueError(f"unknown aggregate {aggregate!r}")
    values = np.asarray(values, dtype=np.float64)
    n_max = len(values) - 1
    if fit_window is None:
        if n_max < 1:
            raise ValueError("need at least shells 0..1 to estimate a dimension")
        fit_window = default_window(n_max)
    lo, hi = int(fit_window[0]), int(fit_window[1])
    if lo > hi:
        raise ValueError(f"empty fit window {fit_window}")
    if lo < 1 or hi > n_max:
        raise ValueError(f"fit window {fit_window} outside [1, {n_max}]")

    exps = [float("nan")] + [float(log_plus(values[n]) / n) for n in range(1, n_max + 1)]
    ns = np.arange(lo, hi + 1, dtype=np.float64)
    logs = log_plus(values[lo : hi + 1])
    max_exp = float(np.max(logs / ns))
    fit = _slope_fit(ns, logs)
    if aggregate == "max":
        value = max_exp
    else:
        value = fit["slope"] if fit is not None else max_exp
    value = max(0.0, value)
    if d is not None:
        value = min(float(d), value)
    return DimEstimate(
        value=float(value),
        method=method,
        fit_window=(lo, hi),
        per_shell_exponents=exps,
        aggregate=aggregate,
        max_exponent=max_exp,
        slope_fit=fit,
    )


def estimate_dim_ball(c: ShellCounts, fit_window=None, aggregate="max", d=None) -> DimEstimate:
    """Estimate from ball counts ``|pix(F) ∩ B(0; 2**n)|``."""
    return estimate_dim(c.cumulative, "ball", fit_window, aggregate, d)


def estimate_dim_shell(c: ShellCounts, fit_window=None, aggregate="max", d=None) -> DimEstimate:
    """Estimate from shell counts ``|pix(F) ∩ S_n|``."""
    return estimate_dim(c.counts, "shell", fit_window, aggregate, d)

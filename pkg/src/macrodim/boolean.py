"""Boolean coverage models on the lattice.

Each cell ``x`` is kept independently with probability ``p(x)``; the draw for
``x`` is a keyed hash of ``(seed, x)`` so any traversal order or sharding of
the box yields the same sample.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import PixelSet, shells_of
from .rng import uniforms_for

__all__ = [
    "CoverageField",
    "BooleanSample",
    "NoIndexError",
    "CellBudgetError",
    "Recurrence",
    "sample_boolean",
    "index_of",
    "recurrence_diagnostic",
    "boolean_intersection_dim",
    "expected_shell_counts",
]

P_MIN = 2.0**-60
# 1 - 2**-60 rounds to 1.0 in binary64; use the largest double below 1
P_MAX = 1.0 - 2.0**-53
MAX_CELLS = 1 << 28
CRITICAL_BAND = 0.05
FAMILIES = ("power", "constant", "table")


class NoIndexError(ValueError):
    """The coverage probabilities have no (stable) power-law index."""


class CellBudgetError(ValueError):
    """The requested lattice box exceeds the cell budget."""


def max_norm(coords):
    coords = np.asarray(coords)
    if coords.ndim == 1:
        return np.abs(coords)
    return np.abs(coords).max(axis=1)


@dataclass
class CoverageField:
    """Coverage probabilities ``x -> p(x)``.

    ``power``: ``min(c (1 + |x|)**-lam, cap)``; ``constant``: ``p0``;
    ``table``: explicit values on finitely many cells (``default`` elsewhere).
    All values are clamped into ``[2**-60, 1 - 2**-53]``.
    """

    family: str
    lam: float = 0.0
    c: float = 1.0
    cap: float = P_MAX
    p0: float = 0.5
    table: dict = field(default_factory=dict)
    default: float = P_MIN
    index_hint: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown coverage family {self.family!r}")
        if self.family == "power":
            if self.lam < 0 or self.c <= 0 or not 0 < self.cap < 1:
                raise ValueError("power family needs lam >= 0, c > 0, 0 < cap < 1")
        if self.family == "constant" and not 0 < self.p0 < 1:
            raise ValueError("constant p0 must lie in (0, 1)")

    @classmethod
    def power(cls, lam, c=1.0, cap=P_MAX):
        return cls("power", lam=lam, c=c, cap=cap)

    @classmethod
    def constant(cls, p0):
        return cls("constant", p0=p0)

    def prob(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim == 1:
            coords = coords[:, None]
        if self.family == "power":
            r = max_norm(coords).astype(np.float64)
            p = np.minimum(self.c * (1.0 + r) ** (-self.lam), self.cap)
        elif self.family == "constant":
            p = np.full(coords.shape[0], self.p0)
        else:
            p = np.array(
                [self.table.get(tuple(int(v) for v in row), self.default) for row in coords],
                dtype=np.float64,
            )
        return np.clip(p, P_MIN, P_MAX)

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.family == "power":
            out.update({"lambda": self.lam, "c": self.c, "cap": self.cap})
        elif self.family == "constant":
            out["p0"] = self.p0
        else:
            out["table"] = [[list(k), v] for k, v in sorted(self.table.items())]
            out["default"] = self.default
        if self.index_hint is not None:
            out["index_hint"] = self.index_hint
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "CoverageField":
        fam = obj["family"]
        hint = obj.get("index_hint")
        if fam == "power":
            return cls(
                "power", lam=float(obj["lambda"]), c=float(obj.get("c", 1.0)),
                cap=float(obj.get("cap", P_MAX)), index_hint=hint,
            )
        if fam == "constant":
            return cls("constant", p0=float(obj["p0"]), index_hint=hint)
        table = {tuple(k): float(v) for k, v in obj.get("table", [])}
        return cls("table", table=table, default=float(obj.get("default", P_MIN)),
                   index_hint=hint)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class BooleanSample:
    pixels: PixelSet
    field: CoverageField
    seed: int
    d: int
    n_max: int


def _box_rows(d, n_max, rows_per_chunk):
    """Yield ``(N, d)`` coordinate blocks tiling ``B(0; 2**n_max)``."""
    r = 1 << n_max
    side = np.arange(-r, r, dtype=np.int64)
    if d == 1:
        step = rows_per_chunk * 4096
        for s in range(0, side.size, step):
            yield side[s : s + step, None]
        return
    rest = np.stack(np.meshgrid(*([side] * (d - 1)), indexing="ij"), -1).reshape(-1, d - 1)
    for s in range(0, side.size, rows_per_chunk):
        first = side[s : s + rows_per_chunk]
        block = np.empty((first.size * rest.shape[0], d), dtype=np.int64)
        block[:, 0] = np.repeat(first, rest.shape[0])
        block[:, 1:] = np.tile(rest, (first.size, 1))
        yield block


def _check_budget(d, n_max):
    cells = (2 ** (n_max + 1)) ** d
    if cells > MAX_CELLS:
        raise CellBudgetError(
            f"B(0;2^{n_max}) in d={d} has {cells} cells, budget is {MAX_CELLS}"
        )
    return cells


def sample_boolean(
    field: CoverageField,
    d: int,
    n_max: int,
    seed: int,
    restrict=None,
    shells=None,
) -> BooleanSample:
    """Sample ``B(p)`` inside ``B(0; 2**n_max)``.

    ``restrict`` optionally maps an ``(N, d)`` coordinate block to a boolean
    mask, sampling ``A ∩ B(p)`` for a lattice set ``A``.  ``shells`` limits
    generation to the given shell indices (the result is identical on those
    shells to a full sample with the same seed).
    """
    if d not in (1, 2, 3):
        raise ValueError("Boolean sampling supports d in {1, 2, 3}")
    _check_budget(d, n_max)
    pixels = PixelSet(d, n_max)
    rows = max(1, (1 << 20) >> ((d - 1) * (n_max + 1)))
    wanted = None if shells is None else np.asarray(sorted(set(shells)))
    for block in _box_rows(d, n_max, rows):
        if wanted is not None:
            block = block[np.isin(shells_of(block), wanted)]
        if restrict is not None:
            block = block[restrict(block)]
        if block.shape[0] == 0:
            continue
        keep = uniforms_for(seed, block) < field.prob(block)
        pixels.add(block[keep])
    return BooleanSample(pixels, field, int(seed), d, n_max)


def expected_shell_counts(field: CoverageField, d: int, n_max: int, restrict=None):
    """Exact ``(E counts[n], Var counts[n])`` by summing over every cell."""
    _check_budget(d, n_max)
    mean = np.zeros(n_max + 1)
    var = np.zeros(n_max + 1)
    rows = max(1, (1 << 20) >> ((d - 1) * (n_max + 1)))
    for block in _box_rows(d, n_max, rows):
        if restrict is not None:
            block = block[restrict(block)]
        if block.shape[0] == 0:
            continue
        p = field.prob(block)
        s = shells_of(block)
        mean += np.bincount(s, weights=p, minlength=n_max + 1)
        var += np.bincount(s, weights=p * (1 - p), minlength=n_max + 1)
    return mean, var


def index_of(field: CoverageField, n_max: int = 12, d: int = 1, samples: int = 256, seed: int = 0):
    """Index ``-lim log p(x) / log |x|`` of the coverage probabilities.

    Known families (and fields carrying ``index_hint``) return the analytic
    value; tables fall back to :func:`numeric_index` and raise
    :class:`NoIndexError` when the ratio is not stable.
    """
    if field.index_hint is not None:
        return float(field.index_hint)
    if field.family == "power":
        return float(field.lam)
    if field.family == "constant":
        return 0.0
    value, spread = numeric_index(field, n_max=n_max, d=d, samples=samples, seed=seed)
    if spread > 0.1:
        raise NoIndexError(f"index estimate unstable (spread {spread:.3f})")
    return value


def numeric_index(field: CoverageField, n_max: int = 12, d: int = 1, samples: int = 256, seed: int = 0):
    """Average of ``-log p(x) / log |x|`` over points with ``|x|`` in
    ``[2**(n_max-2), 2**n_max]``; returns ``(estimate, spread)``."""
    rng = np.random.default_rng(seed)
    lo, hi = 2 ** (n_max - 2), 2**n_max
    radius = rng.integers(lo, hi + 1, size=samples)
    coords = rng.integers(-radius[:, None], radius[:, None] + 1, size=(samples, d))
    axis = rng.integers(0, d, size=samples)
    sign = rng.choice([-1, 1], size=samples)
    coords[np.arange(samples), axis] = sign * radius
    r = max_norm(coords).astype(np.float64)
    ratios = -np.log(field.prob(coords)) / np.log(r)
    return float(np.mean(ratios)), float(np.max(ratios) - np.min(ratios))


@dataclass
class Recurrence:
    verdict: str  # "diverges", "converges" or "critical"
    partial_sums: list[float]
    exponent: float
    prediction: str | None = None
    dim_A: float | None = None
    index: float | None = None


def recurrence_diagnostic(A: PixelSet, field: CoverageField, window=None, dim_A=None) -> Recurrence:
    """Borel–Cantelli classification of ``sum_{x in A} p(x)``.

    Per-shell increments ``sum_{x in A ∩ S_n} p(x)`` are fitted as
    ``2**(e n)`` over the window; ``e >= 0.05`` means divergence (``A`` is
    recurrent for ``B(p)``), ``e <= -0.05`` convergence, anything between is
    reported as critical.  An empty tail (bounded ``A``) converges.
    """
    pts = A.points
    n_max = A.n_max
    inc = np.zeros(n_max + 1)
    if pts.shape[0]:
        inc = np.bincount(shells_of(pts), weights=field.prob(pts), minlength=n_max + 1)
    partial = np.cumsum(inc)
    if window is None:
        window = (max(1, math.ceil(n_max / 2)), n_max)
    lo, hi = window
    tail = inc[lo : hi + 1]
    if not np.any(tail > 0):
        verdict, e = "converges", float("-inf")
    else:
        ns = np.arange(lo, hi + 1)
        ok = tail > 0
        if ok.sum() < 2:
            verdict, e = "converges", float("-inf")
        else:
            e = float(np.polyfit(ns[ok], np.log2(tail[ok]), 1)[0])
            if e >= CRITICAL_BAND:
                verdict = "diverges"
            elif e <= -CRITICAL_BAND:
                verdict = "converges"
            else:
                verdict = "critical"
    prediction = None
    ind = None
    try:
        ind = index_of(field)
    except NoIndexError:
        pass
    if dim_A is not None and ind is not None:
        gap = dim_A - ind
        if abs(gap) < CRITICAL_BAND:
            prediction = "critical"
        else:
            prediction = "diverges" if gap > 0 else "converges"
    return Recurrence(verdict, partial.tolist(), e, prediction, dim_A, ind)


def boolean_intersection_dim(A_dim: float, field: CoverageField, d: int | None = None) -> float:
    """Almost-sure dimension of ``A ∩ B(p)``: ``max(Dim(A) - Ind(p), 0)``."""
    if A_dim < 0 or (d is not None and A_dim > d):
        raise ValueError("A_dim must lie in [0, d]")
    ind = index_of(field)
    return max(A_dim - ind, 0.0)

"""Stable Lévy processes, Brownian motion and stable subordinators.

Paths are generated block by block: block ``b`` draws its increments from an
independent Philox stream keyed on ``(seed, b)`` and is offset by the
endpoint of block ``b - 1``.  Nothing larger than one block is held in
memory, and a path is a deterministic function of its parameters.

Normalizations:

* symmetric-stable: ``E exp(i z X_t) = exp(-t |z|**beta)`` per coordinate
  (``beta = 2`` is Gaussian with variance ``2 t``);
* brownian: standard Brownian motion, variance ``t`` per coordinate;
* stable-subordinator: ``E exp(-lam X_t) = exp(-t lam**rho)``, ``0 < rho < 1``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .lattice import PixelSet
from .rng import block_generator

__all__ = [
    "KINDS",
    "LevyPath",
    "PeaksConfig",
    "StepBudgetError",
    "symmetric_stable",
    "positive_stable",
    "sample_stable_increment",
    "simulate_path",
    "range_pixels",
    "graph_pixels",
    "zero_set_pixels",
    "tall_peaks_pixels",
]

KINDS = ("symmetric-stable", "brownian", "stable-subordinator")
MAX_STEPS = 1 << 31
BLOCK = 1 << 20


class StepBudgetError(ValueError):
    pass


def symmetric_stable(rng: np.random.Generator, beta: float, size) -> np.ndarray:
    """Standard symmetric stable draws with characteristic function
    ``exp(-|z|**beta)`` (Chambers–Mallows–Stuck)."""
    if not 0 < beta <= 2:
        raise ValueError("beta must lie in (0, 2]")
    if beta == 2:
        return math.sqrt(2.0) * rng.standard_normal(size)
    v = rng.uniform(-math.pi / 2, math.pi / 2, size)
    if beta == 1:
        return np.tan(v)
    w = rng.standard_exponential(size)
    return (
        np.sin(beta * v)
        / np.cos(v) ** (1.0 / beta)
        * (np.cos((1.0 - beta) * v) / w) ** ((1.0 - beta) / beta)
    )


def positive_stable(rng: np.random.Generator, rho: float, size) -> np.ndarray:
    """Positive stable draws with ``E exp(-lam X) = exp(-lam**rho)`` (Kanter)."""
    if not 0 < rho < 1:
        raise ValueError("subordinator index must lie in (0, 1)")
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    return (
        np.sin(rho * u)
        / np.sin(u) ** (1.0 / rho)
        * (np.sin((1.0 - rho) * u) / e) ** ((1.0 - rho) / rho)
    )


def sample_stable_increment(beta: float, dt: float, rng: np.random.Generator, size=None):
    """Draw ``X_dt`` of the symmetric ``beta``-stable process."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return dt ** (1.0 / beta) * symmetric_stable(rng, beta, size)


@dataclass(frozen=True)
class LevyPath:
    """A seeded sample path on the grid ``k * dt``, ``k = 0..T/dt``.

    ``index`` is ``beta`` for symmetric-stable, ``rho`` for the subordinator
    and ignored for brownian.  Values are streamed by :meth:`blocks`.
    """

    kind: str
    index: float
    d: int
    T: float
    dt: float
    seed: int
    block: int = BLOCK

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.kind == "stable-subordinator" and self.d != 1:
            raise ValueError("subordinators are one-dimensional")
        if self.T <= 0 or self.dt <= 0:
            raise ValueError("T and dt must be positive")
        if self.n_steps > MAX_STEPS:
            raise StepBudgetError(f"{self.n_steps} steps exceed the 2^31 budget")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def _increments(self, rng, m):
        if self.kind == "brownian":
            return math.sqrt(self.dt) * rng.standard_normal((m, self.d))
        if self.kind == "symmetric-stable":
            return sample_stable_increment(self.index, self.dt, rng, (m, self.d))
        return self.dt ** (1.0 / self.index) * positive_stable(rng, self.index, (m, 1))

    def blocks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(times, values)``; values have shape ``(m, d)``.

        The first block starts with ``X_0 = 0`` at ``t = 0``.
        """
        n = self.n_steps
        last = np.zeros(self.d)
        yield np.zeros(1), last[None, :].copy()
        done = 0
        b = 0
        while done < n:
            m = min(self.block, n - done)
            inc = self._increments(block_generator(self.seed, b), m)
            vals = last + np.cumsum(inc, axis=0)
            times = (done + 1 + np.arange(m)) * self.dt
            last = vals[-1].copy()
            yield times, vals
            done += m
            b += 1

    def values(self) -> tuple[np.ndarray, np.ndarray]:
        """Materialize the whole path; only sensible for short paths."""
        ts, vs = zip(*self.blocks())
        return np.concatenate(ts), np.concatenate(vs)

    def endpoint(self) -> np.ndarray:
        out = None
        for _, v in self.blocks():
            out = v[-1]
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + (["value"] if self.d == 1 else [f"x{j}" for j in range(self.d)]))
            for t, v in self.blocks():
                for ti, vi in zip(t, v):
                    w.writerow([repr(float(ti))] + [repr(float(x)) for x in vi])


def simulate_path(kind: str, index: float, T: float, dt: float, seed: int, d: int = 1) -> LevyPath:
    return LevyPath(kind, float(index), int(d), float(T), float(dt), int(seed))


def _n_max_for(d, n_max):
    cap = PixelSet.max_shell(d)
    if n_max is None:
        return cap
    if n_max > cap:
        raise ValueError(f"n_max={n_max} exceeds {cap} for d={d}")
    return n_max


def range_pixels(path: LevyPath, n_max: int | None = None) -> PixelSet:
    """Pixelization of ``{X_{k dt}}``; defaults to the largest trackable ball."""
    ps = PixelSet(path.d, _n_max_for(path.d, n_max))
    for _, v in path.blocks():
        ps.add(v)
    return ps


def graph_pixels(path: LevyPath, n_max: int | None = None) -> PixelSet:
    """Pixelization of ``{(k dt, X_{k dt})}`` in dimension ``d + 1``.

    Samples are not interpolated: a jump does not fill the cells it crosses.
    The default ``n_max`` is ``floor(log2 T)``, the largest ball whose time
    extent the path covers.
    """
    if n_max is None:
        n_max = max(0, int(math.floor(math.log2(path.T))))
    ps = PixelSet(path.d + 1, _n_max_for(path.d + 1, n_max))
    for t, v in path.blocks():
        ps.add(np.column_stack([t, v]))
    return ps


def zero_set_pixels(beta: float, T: float, seed: int, n_max: int | None = None, dt: float = 1.0) -> PixelSet:
    """Range of a stable subordinator of index ``1 - 1/beta``, standing in for
    the zero set of a symmetric ``beta``-stable process."""
    if not 1 < beta <= 2:
        raise ValueError("zero sets are non-trivial only for beta in (1, 2]")
    path = simulate_path("stable-subordinator", 1.0 - 1.0 / beta, T, dt, seed)
    return range_pixels(path, n_max)


@dataclass(frozen=True)
class PeaksConfig:
    """Tall-peak envelope; ``envelope`` is ``"stable"`` (needs ``beta``) or
    ``"brownian"``."""

    alpha: float
    envelope: str = "stable"
    beta: float | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.envelope not in ("stable", "brownian"):
            raise ValueError(f"unknown envelope {self.envelope!r}")
        if self.envelope == "stable" and not (self.beta and 0 < self.beta <= 2):
            raise ValueError("stable envelope needs beta in (0, 2]")

    def threshold(self, t) -> np.ndarray:
        """Envelope value; ``+inf`` for ``t < e`` so those times never count."""
        t = np.asarray(t, dtype=np.float64)
        out = np.full(t.shape, np.inf)
        ok = t >= math.e
        s = t[ok]
        if self.envelope == "stable":
            out[ok] = s ** (1.0 / self.beta) * np.log2(s) ** self.alpha
        else:
            out[ok] = self.alpha * np.sqrt(2.0 * s * np.log(np.log(s)))
        return out


def tall_peaks_pixels(path: LevyPath, cfg: PeaksConfig, n_max: int | None = None) -> PixelSet:
    """Unit time cells ``[t, t+1)`` containing a sample with ``X_s >= envelope(s)``."""
    if path.d != 1:
        raise ValueError("tall peaks are defined for real-valued paths")
    if path.dt > 1:
        raise ValueError("tall peaks need dt <= 1")
    if n_max is None:
        n_max = max(0, int(math.floor(math.log2(path.T))))
    ps = PixelSet(1, _n_max_for(1, n_max))
    for t, v in path.blocks():
        hit = v[:, 0] >= cfg.threshold(t)
        if hit.any():
            ps.add(t[hit])
    return ps

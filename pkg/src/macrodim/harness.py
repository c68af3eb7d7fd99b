"""Seeded experiment campaigns: simulate, estimate, compare with theory.

Records are appended to a JSON-lines store; a rerun of the same ``id``
appends a new record.  Replica ``r`` of a spec always uses
``derive_seed(base_seed, r)``, so records are reproducible byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import formulas
from .boolean import CoverageField, boolean_intersection_dim, sample_boolean
from .estimator import DimEstimate, estimate_dim
from .lattice import PixelSet, ShellCounts
from .levy import (
    PeaksConfig,
    graph_pixels,
    range_pixels,
    simulate_path,
    tall_peaks_pixels,
    zero_set_pixels,
)
from .rng import derive_seed

log = logging.getLogger(__name__)

KINDS = (
    "boolean-dim",
    "stable-range-dim",
    "graph-dim",
    "zero-set-dim",
    "peaks-dim",
    "oracle-only",
    "lemma-ft-check",
)

# regular power-law counts -> slope; random lacunary sets -> limsup surrogate
DEFAULT_AGGREGATE = {
    "boolean-dim": "slope",
    "stable-range-dim": "max",
    "graph-dim": "max",
    "zero-set-dim": "max",
    "peaks-dim": "max",
}

# Peak sets live on the half-line t >= 0 and fill their limsup shells only in
# rare bursts; ball counts keep earlier bursts, shell counts cap at 2^(n-1).
DEFAULT_METHOD = {"peaks-dim": "ball"}

WORKERS_ENV = "MACRODIM_WORKERS"


def default_tolerance(kind: str, params: dict) -> float:
    """0.15 where convergence is slow (graphs, stable ranges with beta < 1),
    0.1 elsewhere."""
    if kind == "graph-dim":
        return 0.15
    if (kind == "stable-range-dim" and params.get("process", "symmetric-stable") != "brownian"
            and float(params.get("beta", 2.0)) < 1):
        return 0.15
    return 0.1


class SpecError(ValueError):
    """An ExperimentSpec failed validation or a lower layer rejected it."""


@dataclass
class ExperimentSpec:
    id: str
    kind: str
    params: dict = field(default_factory=dict)
    n_max: int | None = None
    replicas: int = 1
    base_seed: int = 0
    fit_window: list[int] | None = None
    tolerance: float | None = None
    method: str | None = None
    aggregate: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"[{self.id}] unknown kind {self.kind!r}")
        if self.replicas < 1:
            raise SpecError(f"[{self.id}] replicas must be >= 1")
        if self.tolerance is None:
            self.tolerance = default_tolerance(self.kind, self.params)
        if self.method is None:
            self.method = DEFAULT_METHOD.get(self.kind, "shell")
        if self.method not in ("shell", "ball"):
            raise SpecError(f"[{self.id}] method must be 'shell' or 'ball'")
        if self.aggregate is None:
            self.aggregate = DEFAULT_AGGREGATE.get(self.kind, "max")
        if self.fit_window is not None:
            self.fit_window = [int(v) for v in self.fit_window]
        _REQUIRED = {
            "boolean-dim": ("d", "lambda"),
            "stable-range-dim": ("T",),
            "graph-dim": ("beta", "T"),
            "zero-set-dim": ("beta", "T"),
            "peaks-dim": ("alpha", "T"),
            "oracle-only": ("oracle",),
            "lemma-ft-check": ("alpha",),
        }
        missing = [k for k in _REQUIRED[self.kind] if k not in self.params]
        if missing:
            raise SpecError(f"[{self.id}] missing params for {self.kind}: {missing}")
        if self.kind == "boolean-dim" and self.n_max is None:
            raise SpecError(f"[{self.id}] boolean-dim needs n_max")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise SpecError(f"unknown spec fields: {sorted(extra)}")
        return cls(**obj)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    estimates: list[DimEstimate]
    median: float
    spread: float
    theory_value: float | None
    passed: bool | None
    extras: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def record(self, include_timing: bool = False) -> dict:
        out = {
            "spec": self.spec.to_dict(),
            "replicas": [e.to_dict() for e in self.estimates],
            "aggregate": {"median": self.median, "spread": self.spread},
            "theory_value": self.theory_value,
            "extras": self.extras,
        }
        if self.passed is not None:
            out["pass"] = self.passed
        else:
            out["status"] = "no-theory"
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(_clean(self.record(include_timing)), sort_keys=True)


def _clean(obj):
    """Make a record JSON-safe: NaN/inf become null, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ------------------------------------------------------------ window rules


def _top_shell(counts: np.ndarray) -> int:
    nz = np.nonzero(counts)[0]
    return int(nz[-1]) if nz.size else 0


def _half_window(n_top: int) -> tuple[int, int]:
    n_top = max(n_top, 2)
    return (max(1, math.ceil(n_top / 2)), n_top)


def _estimate(spec: ExperimentSpec, counts: ShellCounts, n_top: int, d: int) -> DimEstimate:
    n_top = max(2, min(n_top, counts.n_max))
    window = tuple(spec.fit_window) if spec.fit_window else _half_window(n_top)
    vals = counts.counts if spec.method == "shell" else counts.cumulative
    return estimate_dim(vals[: window[1] + 1], spec.method, window, spec.aggregate, d)


# --------------------------------------------------------- per-kind replicas


def _coverage(params) -> CoverageField:
    return CoverageField.power(
        float(params["lambda"]), c=float(params.get("c", 1.0)),
        **({"cap": float(params["cap"])} if "cap" in params else {}),
    )


def _restrict(name):
    if name in (None, "none"):
        return None
    if name == "nonnegative":
        return lambda block: (block >= 0).all(axis=1)
    raise SpecError(f"unknown restriction {name!r}")


def _replica(spec: ExperimentSpec, r: int):
    seed = derive_seed(spec.base_seed, r)
    p = spec.params
    kind = spec.kind
    if kind == "boolean-dim":
        d = int(p["d"])
        sample = sample_boolean(_coverage(p), d, spec.n_max, seed,
                                restrict=_restrict(p.get("restrict")))
        c = sample.pixels.shell_counts()
        return _estimate(spec, c, spec.n_max, d), {}
    if kind == "stable-range-dim":
        process = p.get("process", "symmetric-stable")
        d = int(p.get("d", 1))
        beta = 2.0 if process == "brownian" else float(p["beta"])
        T = float(p["T"])
        path = simulate_path(process, beta, T, float(p.get("dt", 1.0)), seed, d=d)
        ps = range_pixels(path, spec.n_max)
        c = ps.shell_counts()
        n_top = min(int(math.floor(math.log2(T) / beta)), _top_shell(c.counts))
        return _estimate(spec, c, n_top, d), {"discarded": ps.discarded}
    if kind == "graph-dim":
        T = float(p["T"])
        path = simulate_path("symmetric-stable", float(p["beta"]), T,
                             float(p.get("dt", 2.0**-4)), seed, d=int(p.get("d", 1)))
        ps = graph_pixels(path, spec.n_max)
        return _estimate(spec, ps.shell_counts(), ps.n_max, ps.dim), {}
    if kind == "zero-set-dim":
        beta = float(p["beta"])
        T = float(p["T"])
        ps = zero_set_pixels(beta, T, seed, spec.n_max)
        c = ps.shell_counts()
        rho = 1.0 - 1.0 / beta
        n_top = min(int(math.floor(math.log2(T) / rho)), _top_shell(c.counts))
        return _estimate(spec, c, n_top, 1), {}
    if kind == "peaks-dim":
        T = float(p["T"])
        if p.get("brownian"):
            path = simulate_path("brownian", 2.0, T, float(p.get("dt", 1.0)), seed)
            cfg = PeaksConfig(float(p["alpha"]), "brownian")
        else:
            beta = float(p["beta"])
            path = simulate_path("symmetric-stable", beta, T, float(p.get("dt", 1.0)), seed)
            cfg = PeaksConfig(float(p["alpha"]), "stable", beta)
        ps = tall_peaks_pixels(path, cfg, spec.n_max)
        c = ps.shell_counts()
        return _estimate(spec, c, ps.n_max, 1), {"top_shell": _top_shell(c.counts),
                                                  "size": len(ps)}
    raise SpecError(f"[{spec.id}] {kind} has no replicas")


def _replica_job(args):
    spec_dict, r = args
    return _replica(ExperimentSpec.from_dict(spec_dict), r)


# ------------------------------------------------------------------ theory


def theory_value(spec: ExperimentSpec) -> float | None:
    p = spec.params
    kind = spec.kind
    if kind == "boolean-dim":
        d = int(p["d"])
        a_dim = float(p.get("A_dim", 1.0 if p.get("restrict") == "nonnegative" else d))
        return boolean_intersection_dim(a_dim, _coverage(p), d)
    if kind == "stable-range-dim":
        d = int(p.get("d", 1))
        beta = 2.0 if p.get("process") == "brownian" else float(p["beta"])
        return beta if beta < d else None  # recurrent ranges have no theory here
    if kind == "graph-dim":
        return formulas.graph_dim(float(p["beta"]))
    if kind == "zero-set-dim":
        return formulas.subordinator_range_dim(
            formulas.LaplaceExponent.power(1.0 - 1.0 / float(p["beta"])))
    if kind == "peaks-dim":
        if p.get("brownian"):
            return formulas.peaks_dim(float(p["alpha"]), brownian=True)
        return formulas.peaks_dim(float(p["alpha"]), float(p["beta"]))
    if kind == "lemma-ft-check":
        return 0.0
    if kind == "oracle-only":
        if p["oracle"] in ("fourier", "potential-mc"):
            return float(p.get("beta", 2.0))
        return None
    return None


def _oracle_value(spec: ExperimentSpec) -> tuple[float, dict]:
    p = spec.params
    which = p["oracle"]
    if which == "fourier":
        d = int(p.get("d", 1))
        v = formulas.fourier_alpha_c(formulas.CharacteristicExponent.stable(float(p["beta"])), d)
        return v.critical_alpha, v.to_dict()
    if which == "potential-mc":
        d = int(p.get("d", 1))
        process = p.get("process", "symmetric-stable")
        v = formulas.potential_alpha_c_mc(process, float(p.get("beta", 2.0)), d,
                                          int(spec.n_max or 40), int(p.get("mc_replicas", 400)),
                                          derive_seed(spec.base_seed, 0))
        return v.critical_alpha, v.to_dict()
    if which == "graph":
        return formulas.graph_dim(float(p["beta"])), {}
    if which == "peaks":
        return formulas.peaks_dim(float(p["alpha"]), float(p.get("beta", 2.0)),
                                  brownian=bool(p.get("brownian"))), {}
    if which == "subordinator":
        return formulas.subordinator_range_dim(formulas.LaplaceExponent.power(float(p["rho"]))), {}
    raise SpecError(f"[{spec.id}] unknown oracle {which!r}")


# ---------------------------------------------------------------- running


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run(spec: ExperimentSpec, store: str | Path | None = None, workers: int | None = None) -> ExperimentResult:
    """Execute every replica of ``spec``, compare with theory, append to ``store``."""
    start = time.perf_counter()
    workers = workers or _workers()
    extras: dict = {}
    try:
        if spec.kind in ("oracle-only", "lemma-ft-check"):
            if spec.kind == "oracle-only":
                value, detail = _oracle_value(spec)
            else:
                p = spec.params
                z = np.linspace(float(p.get("z_min", 0.1)), float(p.get("z_max", 5.0)),
                                int(p.get("num", 50)))
                value = formulas.verify_lemma_ft(float(p["alpha"]), z)
                detail = {"z_grid": [float(z[0]), float(z[-1]), int(z.size)]}
            est = DimEstimate(float(value), "oracle", (0, 0), [], "none")
            estimates = [est]
            extras["oracle"] = detail
        else:
            jobs = [(spec.to_dict(), r) for r in range(spec.replicas)]
            if workers > 1 and spec.replicas > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    outs = list(pool.map(_replica_job, jobs))
            else:
                outs = [_replica_job(j) for j in jobs]
            estimates = [o[0] for o in outs]
            per_extra = [o[1] for o in outs]
            if any(per_extra):
                extras["per_replica"] = per_extra
    except (ValueError, RuntimeError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"[{spec.id}] {exc}") from exc

    values = np.array([e.value for e in estimates])
    median = float(np.median(values))
    spread = float(values.max() - values.min()) if values.size > 1 else 0.0
    try:
        theory = theory_value(spec)
    except ValueError:
        theory = None
    passed = None if theory is None else bool(abs(median - theory) <= spec.tolerance)
    result = ExperimentResult(spec, estimates, median, spread, theory, passed, extras,
                              time.perf_counter() - start)
    if store is not None:
        append_record(store, result)
    log.info("%s: median=%.4f theory=%s pass=%s", spec.id, median, theory, passed)
    return result


def append_record(store, result: ExperimentResult) -> None:
    with open(store, "a", newline="\n") as fh:
        fh.write(result.to_json() + "\n")


def load_specs(path) -> list[ExperimentSpec]:
    obj = json.loads(Path(path).read_text())
    if isinstance(obj, dict):
        obj = [obj]
    return [ExperimentSpec.from_dict(o) for o in obj]


def read_store(store) -> list[dict]:
    path = Path(store)
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


# ---------------------------------------------------------------- reporting

REPORT_FIELDS = ["id", "kind", "params", "empirical", "theory", "diff", "pass"]


def report(store, kind: str | None = None, ids=None, out_dir=None) -> list[dict]:
    """Comparison rows for the latest record of each experiment id.

    With ``out_dir`` also writes ``report.csv``, ``report.json`` and one
    ``shells_<id>.csv`` of per-shell exponents (one column per replica).
    """
    latest: dict[str, dict] = {}
    for rec in read_store(store):
        latest[rec["spec"]["id"]] = rec
    rows = []
    for sid, rec in latest.items():
        spec = rec["spec"]
        if kind is not None and spec["kind"] != kind:
            continue
        if ids is not None and sid not in ids:
            continue
        emp = rec["aggregate"]["median"]
        th = rec.get("theory_value")
        rows.append({
            "id": sid,
            "kind": spec["kind"],
            "params": json.dumps(spec["params"], sort_keys=True),
            "empirical": emp,
            "theory": th,
            "diff": None if th is None or emp is None else emp - th,
            "pass": rec.get("pass"),
        })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(rows_to_csv(rows))
        (out / "report.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
        for sid, rec in latest.items():
            if not any(r["id"] == sid for r in rows):
                continue
            series = [r["per_shell_exponents"] for r in rec["replicas"]]
            if not any(series):
                continue
            (out / f"shells_{sid}.csv").write_text(_shell_series_csv(series))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row[k] is None else row[k]) for k in REPORT_FIELDS})
    return buf.getvalue()


def _shell_series_csv(series) -> str:
    n = max(len(s) for s in series)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["shell"] + [f"replica_{i}" for i in range(len(series))])
    for k in range(n):
        row = [k]
        for s in series:
            v = s[k] if k < len(s) else None
            row.append("" if v is None or (isinstance(v, float) and not math.isfinite(v)) else v)
        w.writerow(row)
    return buf.getvalue()

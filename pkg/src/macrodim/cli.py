"""Command-line entry point: ``macrodim {simulate,estimate,oracle,run,report}``.

Exit codes: 0 when everything passes, 1 when an experiment fails its
tolerance, 2 on input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import formulas
from .boolean import CellBudgetError, CoverageField, sample_boolean
from .estimator import estimate_dim
from .harness import ExperimentSpec, SpecError, load_specs, report, rows_to_csv, run
from .lattice import PixelSet
from .levy import (
    PeaksConfig,
    graph_pixels,
    range_pixels,
    simulate_path,
    tall_peaks_pixels,
    zero_set_pixels,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _params(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SpecError(f"expected key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        out[k] = _parse_value(v)
    return out


def cmd_simulate(args) -> int:
    p = _params(args.param)
    seed = args.seed
    if args.kind == "boolean":
        field = CoverageField.power(float(p.get("lambda", 0.0)), c=float(p.get("c", 1.0)))
        ps = sample_boolean(field, int(p.get("d", 2)), args.n_max, seed).pixels
    elif args.kind == "stable-range":
        process = p.get("process", "symmetric-stable")
        path = simulate_path(process, float(p.get("beta", 2.0)), float(p["T"]),
                             float(p.get("dt", 1.0)), seed, d=int(p.get("d", 1)))
        ps = range_pixels(path, args.n_max)
    elif args.kind == "graph":
        path = simulate_path("symmetric-stable", float(p["beta"]), float(p["T"]),
                             float(p.get("dt", 2.0**-4)), seed)
        ps = graph_pixels(path, args.n_max)
    elif args.kind == "zero-set":
        ps = zero_set_pixels(float(p["beta"]), float(p["T"]), seed, args.n_max)
    else:
        if p.get("brownian"):
            path = simulate_path("brownian", 2.0, float(p["T"]), 1.0, seed)
            cfg = PeaksConfig(float(p["alpha"]), "brownian")
        else:
            path = simulate_path("symmetric-stable", float(p["beta"]), float(p["T"]), 1.0, seed)
            cfg = PeaksConfig(float(p["alpha"]), "stable", float(p["beta"]))
        ps = tall_peaks_pixels(path, cfg, args.n_max)
    text = ps.to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.shells:
        ps.shell_counts().to_csv(args.shells)
    print(f"{len(ps)} pixels, n_max={ps.n_max}, discarded={ps.discarded}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args) -> int:
    ps = PixelSet.from_text(Path(args.pixels).read_text(), args.n_max, args.dim)
    c = ps.shell_counts()
    vals = c.counts if args.method == "shell" else c.cumulative
    window = tuple(args.window) if args.window else None
    est = estimate_dim(vals, args.method, window, args.aggregate, ps.dim)
    print(json.dumps(_jsonable(est.to_dict()), sort_keys=True))
    return EXIT_OK


def _jsonable(obj):
    from .harness import _clean

    return _clean(obj)


def cmd_oracle(args) -> int:
    p = _params(args.param)
    which = args.which
    if which == "graph":
        out = {"graph_dim": formulas.graph_dim(float(p["beta"]))}
    elif which == "peaks":
        out = {"peaks_dim": formulas.peaks_dim(float(p["alpha"]), float(p.get("beta", 2.0)),
                                               brownian=bool(p.get("brownian")))}
    elif which == "subordinator":
        out = {"range_dim": formulas.subordinator_range_dim(
            formulas.LaplaceExponent.power(float(p["rho"])))}
    elif which == "fourier":
        psi = formulas.CharacteristicExponent.stable(float(p["beta"]), float(p.get("scale", 1.0)))
        out = formulas.fourier_alpha_c(psi, int(p.get("d", 1))).to_dict()
    elif which == "potential-mc":
        if args.seed is None:
            raise SpecError("--seed is required for potential-mc")
        out = formulas.potential_alpha_c_mc(
            p.get("process", "symmetric-stable"), float(p.get("beta", 2.0)), int(p.get("d", 1)),
            int(p.get("n_max", 40)), int(p.get("replicas", 400)), args.seed).to_dict()
    elif which == "bessel":
        out = {"K": formulas.bessel_k(float(p["nu"]), float(p["w"]))}
    else:
        z = np.linspace(float(p.get("z_min", 0.1)), float(p.get("z_max", 5.0)),
                        int(p.get("num", 50)))
        out = {"max_relative_error": formulas.verify_lemma_ft(float(p["alpha"]), z)}
    print(json.dumps(_jsonable(out), sort_keys=True))
    return EXIT_OK


def cmd_run(args) -> int:
    if args.config:
        specs = load_specs(args.config)
    else:
        if args.kind is None or args.seed is None:
            raise SpecError("run needs --config, or --kind together with --seed")
        specs = [ExperimentSpec(
            id=args.id or args.kind, kind=args.kind, params=_params(args.param),
            n_max=args.n_max, replicas=args.replicas, base_seed=args.seed,
            fit_window=args.window, tolerance=args.tolerance,
            method=args.method, aggregate=args.aggregate,
        )]
    store = Path(args.out_dir) / "results.jsonl" if args.out_dir else args.store
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    failed = False
    for spec in specs:
        res = run(spec, store=store)
        status = "no-theory" if res.passed is None else ("PASS" if res.passed else "FAIL")
        print(f"{spec.id}: median={res.median:.4f} theory={res.theory_value} "
              f"spread={res.spread:.4f} {status} ({res.wall_time:.1f}s)")
        failed |= res.passed is False
    if args.out_dir:
        report(store, out_dir=args.out_dir)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_report(args) -> int:
    rows = report(args.store, kind=args.kind, out_dir=args.out_dir)
    sys.stdout.write(rows_to_csv(rows))
    return EXIT_FAIL if any(r["pass"] is False for r in rows) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macrodim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="emit pixels of a simulated random set")
    s.add_argument("kind", choices=["boolean", "stable-range", "graph", "zero-set", "peaks"])
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--n-max", type=int, default=None)
    s.add_argument("--param", "-p", action="append", metavar="KEY=VALUE")
    s.add_argument("--out", help="pixel file (default: stdout)")
    s.add_argument("--shells", help="also write shell counts CSV here")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="pixels file -> dimension estimate (JSON)")
    e.add_argument("pixels")
    e.add_argument("--n-max", type=int, required=True)
    e.add_argument("--dim", type=int, default=None)
    e.add_argument("--method", choices=["shell", "ball"], default="shell")
    e.add_argument("--aggregate", choices=["max", "slope"], default="max")
    e.add_argument("--window", type=int, nargs=2, metavar=("LO", "HI"))
    e.set_defaults(func=cmd_estimate)

    o = sub.add_parser("oracle", help="theoretical dimension values")
    o.add_argument("which", choices=["graph", "peaks", "subordinator", "fourier",
                                     "potential-mc", "bessel", "lemma-ft"])
    o.add_argument("--param", "-p", action="append", metavar="KEY=VALUE")
    o.add_argument("--seed", type=int, default=None)
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("run", help="run an experiment or a campaign file")
    r.add_argument("--config", help="JSON spec or array of specs")
    r.add_argument("--kind")
    r.add_argument("--id")
    r.add_argument("--param", "-p", action="append", metavar="KEY=VALUE")
    r.add_argument("--seed", type=int)
    r.add_argument("--n-max", type=int)
    r.add_argument("--replicas", type=int, default=1)
    r.add_argument("--window", type=int, nargs=2, metavar=("LO", "HI"))
    r.add_argument("--tolerance", type=float, default=None)
    r.add_argument("--method", choices=["shell", "ball"], default=None)
    r.add_argument("--aggregate", choices=["max", "slope"], default=None)
    r.add_argument("--store", default="results.jsonl")
    r.add_argument("--out-dir", help="write results.jsonl, report.csv, shells_<id>.csv here")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("report", help="comparison table from a result store")
    rp.add_argument("--store", default="results.jsonl")
    rp.add_argument("--kind")
    rp.add_argument("--out-dir")
    rp.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SpecError, CellBudgetError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

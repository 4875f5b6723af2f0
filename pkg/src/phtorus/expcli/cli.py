"""phtorus command line: run, list, default-config."""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from .. import __version__
from . import config as cfgmod
from . import systems
from .experiments import RUNNERS, Outcome, _plain

log = logging.getLogger("phtorus")

CATALOGUE = {
    "spectrum": "Lyapunov spectrum by QR tangent propagation; exponent values and the "
                "symmetric pairing lambda_j = -lambda_{n+1-j} of symplectic maps",
    "audit": "partial hyperbolicity, alpha-pinching and alpha-bunching from sampled rates; "
             "monotonicity in alpha and bunching of isometric centers",
    "holonomy": "center holonomies along strong leaves: identity, groupoid law, equivariance, "
                "geometric Cauchy decay of A_n, and the homoclinic su-path of the linear factor",
    "perturb-sweep": "localized symplectic center twists: exact support, derivative at the "
                     "center, volume preservation, schedule formulas and C^r size",
    "ip-test": "projective cocycle: convergence to the pinching direction, circle transport "
               "metric, and holonomy invariance of empirical fiber measures",
    "separation": "separation witness: rotation-compensated holonomy drift against sin^2 beta_k "
                  "and the projective distance of the three holonomy images",
}

DEFAULTS = {
    "spectrum": {"experiment": "spectrum", "seed": 0, "system": systems.CAT,
                 "params": {"n_iter": 1_000_000, "qr_period": 1, "expected": [0.9624237, -0.9624237],
                            "tol": 1e-3, "max_runtime": 10.0}},
    "audit": {"experiment": "audit", "seed": 0,
              "system": [systems.cat_times(systems.standard(0.0)), systems.cat_times(systems.standard(0.1)),
                         systems.cat_times(systems.ROT90)],
              "params": {"alpha_grid": 50, "alpha_min": 1e-4, "alpha_max": 10.0, "isometric": [2]}},
    "holonomy": {"experiment": "holonomy", "seed": 0,
                 "system": {"kind": "perturbed", "base": systems.cat_times(systems.ROT90),
                            "twist": {"center": [0.3, 0.6, 0.5, 0.5], "delta": 0.2, "beta": 0.4, "r": 2}},
                 "params": {"tol": 1e-12, "n_pairs": 20, "max_offset": 0.2, "decay_margin": 0.02,
                            "lattice_vector": [1, 0], "homoclinic_z": [0.723607, 0.447214]}},
    "perturb-sweep": {"experiment": "perturb-sweep", "seed": 0, "system": systems.cat_times(systems.standard(0.1)),
                      "params": {"k_range": [1, 20], "sigma": 4.0, "epsilon": 0.5, "r": 2,
                                 "outside_samples": 100_000, "det_samples": 10_000, "det_tol": 1e-10}},
    "ip-test": {"experiment": "ip-test", "seed": 0, "system": systems.cat_times(systems.standard(0.1)),
                "params": {"block": [[2, 1], [1, 1]], "expected_angle": 0.5535744, "n_angles": 64,
                           "max_steps": 200, "angle_tol": 1e-6, "expected_eigenvalues": [2.1668, 0.4615],
                           "metric_triples": 1000}},
    "separation": {"experiment": "separation", "seed": 0, "system": systems.cat_times(systems.standard(0.1)),
                   "params": {"k_range": [3, 12], "sigma": 4.0, "epsilon": 0.5, "r": 2,
                              "beta_schedule": "default"}},
}


def list_experiments() -> dict[str, str]:
    return dict(CATALOGUE)


def emit_default_config(kind: str) -> str:
    if kind not in DEFAULTS:
        raise ValueError(f"unknown experiment kind {kind!r}; known: {sorted(DEFAULTS)}")
    return cfgmod.dump(DEFAULTS[kind])


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")


def write_plot(path: Path, table: str, header, columns, title: str, logscale: str) -> None:
    x = header.index(columns[0]) + 1
    lines = ["set datafile separator ','", f"set title '{title}'", "set key autotitle columnhead",
             f"set xlabel '{columns[0]}'"]
    if logscale:
        lines.append(f"set logscale {logscale}")
    plots = [f"'{table}.csv' using {x}:{header.index(c) + 1} with linespoints" for c in columns[1:]]
    lines.append("plot " + ", \\\n     ".join(plots))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _versions() -> dict:
    import numba
    import scipy
    return {"phtorus": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def run(cfg: cfgmod.ExperimentConfig, out_dir, threads: int = 1) -> dict:
    """Run one experiment, write report.json, CSVs and plot scripts to
    out_dir and return the report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    errors = []
    try:
        outcome = RUNNERS[cfg.experiment](cfg, threads)
    except Exception as exc:  # recorded in the report; the run still writes what it has
        log.exception("experiment %s failed", cfg.experiment)
        errors.append({"error": f"{type(exc).__name__}: {exc}", "traceback": traceback.format_exc()})
        outcome = Outcome()
    artifacts = []
    for name, (header, rows) in outcome.tables.items():
        write_csv(out_dir / f"{name}.csv", header, rows)
        artifacts.append(f"{name}.csv")
    for name, (table, columns, title, logscale) in outcome.plots.items():
        if table in outcome.tables:
            write_plot(out_dir / f"{name}.plot", table, outcome.tables[table][0], columns, title, logscale)
            artifacts.append(f"{name}.plot")
    checks = [c.to_dict() for c in outcome.checks]
    criteria: dict[str, bool] = {}
    for c in checks:
        if "criterion" in c:
            key = str(c["criterion"])
            criteria[key] = criteria.get(key, True) and c["passed"]
    passed = not errors and bool(checks) and all(c["passed"] for c in checks)
    report = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "results": _plain(outcome.results),
        "checks": checks,
        "criteria": criteria,
        "passed": passed,
        "errors": errors,
        "artifacts": sorted(artifacts),
        "timings": {"total_seconds": time.perf_counter() - t0},
        "versions": _versions(),
        "threads": threads,
    }
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return report


# ---------------------------------------------------------------------------
# argument handling


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phtorus", description="Experiments on partially hyperbolic torus maps.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a config file")
    r.add_argument("--config", required=True, type=Path, help="YAML config path")
    r.add_argument("--out", type=Path, default=None, help="output directory (default: config 'output' or ./out)")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--threads", type=int, default=1, help="worker threads for per-index sweeps")
    sub.add_parser("list", help="list the experiment kinds")
    d = sub.add_parser("default-config", help="print the default config of an experiment kind")
    d.add_argument("kind")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("PHTORUS_LOG", "WARNING"), format="%(levelname)s %(message)s")
    args = _parser().parse_args(argv)
    if args.command == "list":
        for k, v in list_experiments().items():
            print(f"{k:14s} {v}")
        return 0
    if args.command == "default-config":
        try:
            sys.stdout.write(emit_default_config(args.kind))
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    try:
        cfg = cfgmod.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    out = args.out or Path(cfg.output or "out")
    report = run(cfg, out, args.threads)
    for c in report["checks"]:
        tag = "PASS" if c["passed"] else "FAIL"
        print(f"{tag} {c['name']}")
    for e in report["errors"]:
        print(f"ERROR {e['error']}", file=sys.stderr)
    print(f"report: {out / 'report.json'}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())

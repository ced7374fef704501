"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 runtime or numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfiguration, parse_config
from .landscape import (
    default_workers,
    robustness_scan,
    run_landscape,
    write_clusters_json,
    write_histogram_csv,
    write_robustness_csv,
    write_values_csv,
)
from .objectives import evaluate, value_and_gradient
from .optimizer import init_random_controls, optimize, write_history_csv
from .propagator import PWCControls, propagate, write_trajectory_csv

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
GRADCHECK_TOL = 1e-5


def _initial_controls(cfg: RunConfiguration) -> PWCControls:
    if cfg.controls is not None:
        return cfg.controls
    return init_random_controls(cfg.system, cfg.grid, replace(cfg.init, seed=cfg.seed))


def _controls_json(controls: PWCControls) -> dict:
    return {"u": controls.u.tolist(), "w": controls.w.tolist(), "n": controls.n.tolist()}


def cmd_simulate(cfg: RunConfiguration, out: Path, args) -> int:
    controls = _initial_controls(cfg)
    traj = propagate(cfg.system, controls, cfg.initial_state)
    write_trajectory_csv(out / "trajectory.csv", traj)
    print(f"wrote {out / 'trajectory.csv'} ({len(traj.times)} rows)")
    return EXIT_OK


def _run_optimize(cfg: RunConfiguration):
    controls0 = _initial_controls(cfg)
    return optimize(cfg.objective, cfg.system, controls0, cfg.optimizer, seed=cfg.seed)


def cmd_optimize(cfg: RunConfiguration, out: Path, args) -> int:
    result = _run_optimize(cfg)
    write_history_csv(out / "history.csv", result)
    summary = {
        "final_value": result.final_value,
        "iterations": result.iterations_used,
        "flag": result.converged,
        "seed": result.seed,
        "controls": _controls_json(result.final_controls),
    }
    (out / "result.json").write_text(json.dumps(summary, indent=2))
    print(f"final value {result.final_value:.6e} after {result.iterations_used} iterations "
          f"({result.converged})")
    return EXIT_RUNTIME if result.aborted else EXIT_OK


def cmd_landscape(cfg: RunConfiguration, out: Path, args) -> int:
    if cfg.landscape is None:
        raise ConfigError("SCHEMA_INVALID", [("landscape", "landscape block required")])
    lcfg = replace(cfg.landscape, master_seed=cfg.seed)
    workers = args.workers if args.workers else default_workers()
    result = run_landscape(cfg.objective, cfg.system, cfg.grid, lcfg, workers=workers)
    write_values_csv(out / "values.csv", result)
    write_histogram_csv(out / "histogram.csv", result)
    write_clusters_json(out / "clusters.json", result)
    print(f"{lcfg.L} launches, {result.n_aborted} aborted, {len(result.clusters)} cluster(s)")
    for c in result.clusters:
        print(f"  mean {c.mean:.4e}  count {c.count}  range [{c.min:.4e}, {c.max:.4e}]")
    return EXIT_OK


def cmd_robustness(cfg: RunConfiguration, out: Path, args) -> int:
    if cfg.controls is not None:
        controls = cfg.controls
    else:
        result = _run_optimize(cfg)
        if result.aborted:
            return EXIT_RUNTIME
        controls = result.final_controls
    rob = cfg.document["robustness"]
    report = robustness_scan(cfg.objective, cfg.system, controls, rob["levels"], rob["samples"], cfg.seed)
    write_robustness_csv(out / "robustness.csv", report)
    for e, m, s in zip(report.levels, report.mean, report.std):
        print(f"eps {e:g}: mean {m:.6e} std {s:.3e}")
    return EXIT_OK


def finite_difference_gradient(obj, system, controls: PWCControls, h: float = 1e-5) -> np.ndarray:
    x = controls.flat()
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (evaluate(obj, system, controls.with_flat(xp))
                - evaluate(obj, system, controls.with_flat(xm))) / (2 * h)
    return g


def gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest deviation, relative to the largest finite-difference component."""
    scale = max(float(np.abs(numeric).max(initial=0.0)), 1e-12)
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale


def cmd_gradcheck(cfg: RunConfiguration, out: Path, args) -> int:
    controls = _initial_controls(cfg)
    _, grad = value_and_gradient(cfg.objective, cfg.system, controls)
    fd = finite_difference_gradient(cfg.objective, cfg.system, controls)
    err = gradient_error(grad.flat(), fd)
    print(f"max relative gradient error {err:.3e} over {fd.size} parameters")
    return EXIT_OK if err <= GRADCHECK_TOL else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "landscape": cmd_landscape,
    "robustness": cmd_robustness,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ingrape", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        if name == "landscape":
            p.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.seed is not None:
            doc = json.loads(text)
            doc["seed"] = args.seed
            text = json.dumps(doc)
        cfg = parse_config(text)
    except (ConfigError, json.JSONDecodeError) as exc:
        code = getattr(exc, "code", "SYNTAX_ERROR")
        print(f"error [{code}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(cfg.document["output"]["directory"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

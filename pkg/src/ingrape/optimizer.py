"""Gradient descent with an adaptive step over piecewise-constant (u, w)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import ControlledSystem
from .objectives import evaluate, value_and_gradient
from .propagator import PWCControls, TimeGrid

MASK64 = (1 << 64) - 1

CONVERGED_GRAD = "grad_tol"
CONVERGED_F = "f_tol"
MAX_ITERS = "max_iters"
LINE_SEARCH = "line_search"
NON_FINITE = "non_finite"


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Per-run seed: splitmix64(master + index * golden gamma), all mod 2**64."""
    return splitmix64((master_seed + index * 0x9E3779B97F4A7C15) & MASK64)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & MASK64))


@dataclass(frozen=True)
class InitSpec:
    u_amplitude: float = 1.0
    w_amplitude: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (self.u_amplitude > 0 and self.w_amplitude > 0):
            raise ValueError("initialization amplitudes must be positive")


def init_random_controls(system: ControlledSystem, grid: TimeGrid, spec: InitSpec) -> PWCControls:
    rng = make_rng(spec.seed)
    u = rng.uniform(-spec.u_amplitude, spec.u_amplitude, size=(grid.M, system.n_coherent))
    w = rng.uniform(0.0, spec.w_amplitude, size=(grid.M, system.n_controls))
    return PWCControls(grid, u, w)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 1000
    grad_tol: float = 1e-8
    f_tol: float = 1e-12
    step_init: float = 0.1
    backtrack_factor: float = 0.5
    grow_factor: float = 1.5
    max_backtracks: int = 30
    u_bound: float | None = None

    def __post_init__(self):
        if self.max_iters < 0 or self.max_backtracks < 1:
            raise ValueError("iteration limits must be positive")
        if not (self.grad_tol > 0 and self.f_tol > 0 and self.step_init > 0):
            raise ValueError("tolerances and initial step must be positive")
        if not 0 < self.backtrack_factor < 1 < self.grow_factor:
            raise ValueError("need 0 < backtrack_factor < 1 < grow_factor")
        if self.u_bound is not None and not self.u_bound > 0:
            raise ValueError("u_bound must be positive")


@dataclass(frozen=True, eq=False)
class RunResult:
    final_value: float
    final_controls: PWCControls
    iterations_used: int
    converged: str
    history: list[tuple[float, float, float]]
    seed: int | None = None
    min_n: float = 0.0  # smallest spectral density seen across all iterates

    @property
    def aborted(self) -> bool:
        return self.converged == NON_FINITE


def _project(controls: PWCControls, bound: float | None) -> PWCControls:
    if bound is None:
        return controls
    return PWCControls(controls.grid, np.clip(controls.u, -bound, bound), controls.w)


def optimize(obj, system: ControlledSystem, controls0: PWCControls, config: OptimizerConfig,
             seed: int | None = None) -> RunResult:
    """Minimize ``obj`` by gradient descent with a growing/backtracking step.

    A trial step x - s g is accepted only on strict decrease, after which s
    grows; otherwise s shrinks and the step is retried.  ``obj`` needs
    ``value_and_gradient``-compatible structure (see :mod:`objectives`) or its
    own ``value_and_gradient(system, controls)`` method.
    """
    vg = getattr(obj, "value_and_gradient", None)
    ev = getattr(obj, "evaluate", None)
    if vg is None:
        def vg(system, controls):
            return value_and_gradient(obj, system, controls)

        def ev(system, controls):
            return evaluate(obj, system, controls)

    x = _project(controls0, config.u_bound)
    f, g = vg(system, x)
    gvec = g.flat()
    gnorm = float(np.linalg.norm(gvec))
    history = [(f, gnorm, 0.0)]
    min_n = float(x.n.min()) if x.n.size else 0.0
    step = config.step_init

    def done(flag, iters):
        return RunResult(f, x, iters, flag, history, seed, min_n)

    if not (math.isfinite(f) and np.all(np.isfinite(gvec))):
        return done(NON_FINITE, 0)
    values = [f]
    for it in range(1, config.max_iters + 1):
        if gnorm < config.grad_tol:
            return done(CONVERGED_GRAD, it - 1)
        accepted = False
        for _ in range(config.max_backtracks):
            trial = _project(x.with_flat(x.flat() - step * gvec), config.u_bound)
            f_trial = ev(system, trial)
            if not math.isfinite(f_trial):
                return done(NON_FINITE, it - 1)
            if f_trial < f:
                accepted = True
                break
            step *= config.backtrack_factor
        if not accepted:
            return done(LINE_SEARCH, it - 1)
        x = trial
        if x.n.size:
            min_n = min(min_n, float(x.n.min()))
        f, g = vg(system, x)
        gvec = g.flat()
        gnorm = float(np.linalg.norm(gvec))
        history.append((f, gnorm, step))
        values.append(f)
        if not (math.isfinite(f) and np.all(np.isfinite(gvec))):
            return done(NON_FINITE, it)
        step *= config.grow_factor
        if it >= 5 and values[-6] - values[-1] < config.f_tol:
            return done(CONVERGED_F, it)
    if gnorm < config.grad_tol:
        return done(CONVERGED_GRAD, config.max_iters)
    return done(MAX_ITERS, config.max_iters)


def write_history_csv(path: str | Path, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "value", "grad_norm", "step"])
        for i, (v, gn, s) in enumerate(result.history):
            writer.writerow([i, repr(v), repr(gn), repr(s)])

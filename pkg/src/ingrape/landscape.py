"""Multi-start statistics of optimized objective values."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .models import ControlledSystem
from .objectives import evaluate
from .optimizer import (
    InitSpec,
    OptimizerConfig,
    RunResult,
    derive_seed,
    init_random_controls,
    make_rng,
    optimize,
)
from .propagator import PWCControls, TimeGrid


@dataclass(frozen=True)
class LandscapeConfig:
    L: int
    master_seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    bins: int = 20

    def __post_init__(self):
        if self.L < 1 or self.bins < 1:
            raise ValueError("need L >= 1 and bins >= 1")


@dataclass(frozen=True)
class Cluster:
    mean: float
    count: int
    min: float
    max: float


@dataclass(frozen=True, eq=False)
class LandscapeResult:
    runs: list[RunResult]  # indexed by launch
    seeds: list[int]
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray
    clusters: list[Cluster]

    @property
    def values(self) -> np.ndarray:
        return np.array([r.final_value for r in self.runs])

    @property
    def flags(self) -> list[str]:
        return [r.converged for r in self.runs]

    @property
    def sorted_values(self) -> list[tuple[int, float]]:
        return sorted(enumerate(self.values.tolist()), key=lambda iv: (iv[1], iv[0]))

    @property
    def n_aborted(self) -> int:
        return sum(r.aborted for r in self.runs)


def detect_peaks(values, gap_factor: float = 20.0, min_fraction: float = 0.05,
                 min_gap: float = 1e-12) -> list[Cluster]:
    """Split sorted values at dominant gaps.

    A gap splits when it exceeds ``gap_factor`` times the median consecutive gap
    (and ``min_gap``) and leaves at least ``min_fraction`` of all values on each
    side.  At most one further split is made, so there are at most 3 clusters.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("detect_peaks needs at least one value")
    total = v.size
    min_count = max(1, int(np.ceil(min_fraction * total)))

    def best_split(lo: int, hi: int):
        seg = v[lo:hi]
        if seg.size < 2 * min_count:
            return None
        gaps = np.diff(seg)
        med = float(np.median(gaps))
        # candidates leave min_count on each side
        idx = np.arange(min_count - 1, seg.size - min_count)
        if idx.size == 0:
            return None
        i = int(idx[np.argmax(gaps[idx])])
        gap = float(gaps[i])
        if gap > min_gap and gap > gap_factor * med:
            return lo + i + 1, gap / max(med, min_gap)
        return None

    bounds = [(0, total)]
    first = best_split(0, total)
    if first is not None:
        cut = first[0]
        bounds = [(0, cut), (cut, total)]
        options = [(s, b) for b in bounds if (s := best_split(*b)) is not None]
        if options:
            (cut2, _), (lo, hi) = max(options, key=lambda o: o[0][1])
            bounds = sorted([b for b in bounds if b != (lo, hi)] + [(lo, cut2), (cut2, hi)])
    return [Cluster(float(v[lo:hi].mean()), hi - lo, float(v[lo]), float(v[hi - 1]))
            for lo, hi in bounds]


def _histogram(values: np.ndarray, bins: int):
    lo, hi = float(values.min()), float(values.max())
    # widen a (near) degenerate range so every bin has positive width
    pad = 1e-9 * max(abs(lo), abs(hi), 1.0)
    if hi - lo < pad:
        lo, hi = lo - pad, hi + pad
    return np.histogram(values, bins=bins, range=(lo, hi))


def _launch(args) -> RunResult:
    obj, system, grid, init, opt, seed = args
    controls0 = init_random_controls(system, grid, replace(init, seed=seed))
    return optimize(obj, system, controls0, opt, seed=seed)


def run_landscape(obj, system: ControlledSystem, grid: TimeGrid, config: LandscapeConfig,
                  workers: int = 1) -> LandscapeResult:
    """Run ``config.L`` seeded launches; launch i uses derive_seed(master_seed, i)."""
    seeds = [derive_seed(config.master_seed, i) for i in range(config.L)]
    tasks = [(obj, system, grid, config.init, config.optimizer, s) for s in seeds]
    if workers > 1 and config.L > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map keeps input order, so slot i always holds launch i
            runs = list(pool.map(_launch, tasks))
    else:
        runs = [_launch(t) for t in tasks]
    good = np.array([r.final_value for r in runs if not r.aborted])
    if good.size:
        counts, edges = _histogram(good, config.bins)
        clusters = detect_peaks(good)
    else:
        counts, edges, clusters = np.zeros(config.bins, dtype=int), np.zeros(config.bins + 1), []
    return LandscapeResult(runs, seeds, edges, counts, clusters)


@dataclass(frozen=True)
class RobustnessReport:
    levels: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    samples: int


def robustness_scan(obj, system: ControlledSystem, controls: PWCControls, levels, samples: int,
                    seed: int) -> RobustnessReport:
    """Objective under multiplicative noise u(1 + eps xi), w(1 + eps xi'), xi ~ U(-1, 1)."""
    levels = np.asarray(levels, dtype=float)
    if np.any(levels < 0) or samples < 1:
        raise ValueError("levels must be nonnegative and samples >= 1")
    rng = make_rng(seed)
    means, stds = [], []
    for eps in levels:
        vals = []
        for _ in range(samples):
            xu = rng.uniform(-1.0, 1.0, size=controls.u.shape)
            xw = rng.uniform(-1.0, 1.0, size=controls.w.shape)
            pert = PWCControls(controls.grid, controls.u * (1 + eps * xu), controls.w * (1 + eps * xw))
            vals.append(evaluate(obj, system, pert))
        vals = np.array(vals)
        means.append(vals.mean())
        stds.append(vals.std() if eps > 0 else 0.0)
    return RobustnessReport(levels, np.array(means), np.array(stds), samples)


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def write_values_csv(path, result: LandscapeResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_index", "seed", "final_value", "iterations", "flag"])
        for i, (run, seed) in enumerate(zip(result.runs, result.seeds)):
            writer.writerow([i, seed, repr(run.final_value), run.iterations_used, run.converged])


def write_histogram_csv(path, result: LandscapeResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count"])
        e = result.histogram_edges
        for i, c in enumerate(result.histogram_counts):
            writer.writerow([repr(float(e[i])), repr(float(e[i + 1])), int(c)])


def write_clusters_json(path, result: LandscapeResult) -> None:
    doc = {
        "clusters": [vars(c) for c in result.clusters],
        "n_runs": len(result.runs),
        "n_aborted": result.n_aborted,
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def write_robustness_csv(path, report: RobustnessReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", "mean", "std"])
        for e, m, s in zip(report.levels, report.mean, report.std):
            writer.writerow([repr(float(e)), repr(float(m)), repr(float(s))])

import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ingrape.landscape import (
    LandscapeConfig,
    detect_peaks,
    robustness_scan,
    run_landscape,
    write_clusters_json,
    write_histogram_csv,
    write_robustness_csv,
    write_values_csv,
)
from ingrape.models import preset_qubit
from ingrape.objectives import GateOnStates, evaluate, gate_targets
from ingrape.optimizer import InitSpec, OptimizerConfig, derive_seed, init_random_controls, optimize
from ingrape.propagator import PWCControls, TimeGrid

from .helpers import DoubleWell


def _hadamard_setup():
    system = preset_qubit(1.0, 0.002)
    grid = TimeGrid(3.0, 8)
    return GateOnStates(gate_targets()["hadamard"]), system, grid


def test_detect_peaks_constant():
    clusters = detect_peaks([0.3] * 40)
    assert len(clusters) == 1 and clusters[0].count == 40


def test_detect_peaks_bimodal():
    rng = np.random.default_rng(0)
    vals = np.concatenate([1e-6 * (1 + 0.05 * rng.normal(size=50)),
                           1e-2 * (1 + 0.05 * rng.normal(size=50))])
    clusters = detect_peaks(rng.permutation(vals))
    assert len(clusters) == 2
    assert clusters[0].mean < clusters[1].mean
    assert [c.count for c in clusters] == [50, 50]


def test_detect_peaks_unimodal():
    rng = np.random.default_rng(1)
    assert len(detect_peaks(rng.normal(1.0, 0.1, 200))) == 1


def test_detect_peaks_ignores_small_outlier_groups():
    vals = [1e-3] * 98 + [0.5, 0.6]
    assert len(detect_peaks(vals)) == 1


def test_detect_peaks_at_most_three():
    vals = np.concatenate([np.full(20, v) + 1e-6 * np.arange(20) for v in (0.0, 1.0, 2.0, 3.0)])
    clusters = detect_peaks(vals)
    assert 2 <= len(clusters) <= 3
    assert sum(c.count for c in clusters) == vals.size


def test_detect_peaks_empty_rejected():
    with pytest.raises(ValueError):
        detect_peaks([])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60), st.randoms(use_true_random=False))
def test_detect_peaks_permutation_invariant(vals, rnd):
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    assert detect_peaks(vals) == detect_peaks(shuffled)
    assert sum(c.count for c in detect_peaks(vals)) == len(vals)


@settings(max_examples=60, deadline=None)
@given(st.floats(-10, 10), st.lists(st.floats(0, 1e-12), min_size=1, max_size=80))
def test_detect_peaks_tight_sample_single(base, offsets):
    assert len(detect_peaks([base + o for o in offsets])) == 1


def test_single_launch_matches_optimize():
    obj, system, grid = _hadamard_setup()
    cfg = LandscapeConfig(1, master_seed=42, init=InitSpec(1.0, 0.3),
                          optimizer=OptimizerConfig(max_iters=30))
    res = run_landscape(obj, system, grid, cfg)
    seed = derive_seed(42, 0)
    direct = optimize(obj, system, init_random_controls(system, grid, InitSpec(1.0, 0.3, seed)),
                      cfg.optimizer, seed=seed)
    assert res.seeds == [seed]
    assert res.values[0] == direct.final_value
    assert res.runs[0].history == direct.history


def test_workers_do_not_change_results():
    obj, system, grid = _hadamard_setup()
    cfg = LandscapeConfig(4, master_seed=3, init=InitSpec(1.0, 0.3),
                          optimizer=OptimizerConfig(max_iters=20))
    a = run_landscape(obj, system, grid, cfg, workers=1)
    b = run_landscape(obj, system, grid, cfg, workers=2)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.flags == b.flags
    assert [r.history for r in a.runs] == [r.history for r in b.runs]


def test_histogram_counts_sum_to_runs():
    obj, system, grid = _hadamard_setup()
    res = run_landscape(obj, system, grid, LandscapeConfig(
        5, master_seed=9, optimizer=OptimizerConfig(max_iters=5), bins=4))
    assert res.histogram_counts.sum() == 5
    assert len(res.histogram_edges) == 5
    assert sum(c.count for c in res.clusters) == 5


def test_double_well_surrogate_gives_two_clusters():
    well = DoubleWell(0.2)
    system = preset_qubit(1.0, 0.1)
    cfg = LandscapeConfig(40, master_seed=11, init=InitSpec(2.0, 0.1),
                          optimizer=OptimizerConfig(max_iters=500, grad_tol=1e-10, f_tol=1e-16))
    res = run_landscape(well, system, TimeGrid(1.0, 1), cfg)
    clusters = res.clusters
    assert len(clusters) == 2
    lo, hi = well.minima()
    assert clusters[0].mean == pytest.approx(lo, abs=1e-8)
    assert clusters[1].mean == pytest.approx(hi, abs=1e-8)


def test_robustness_zero_level_and_determinism():
    obj, system, grid = _hadamard_setup()
    controls = init_random_controls(system, grid, InitSpec(1.0, 0.3, seed=1))
    rep = robustness_scan(obj, system, controls, [0.0, 0.01, 0.1], 6, seed=5)
    assert rep.mean[0] == evaluate(obj, system, controls)
    assert rep.std[0] == 0.0
    again = robustness_scan(obj, system, controls, [0.0, 0.01, 0.1], 6, seed=5)
    assert np.array_equal(rep.mean, again.mean) and np.array_equal(rep.std, again.std)
    with pytest.raises(ValueError):
        robustness_scan(obj, system, controls, [-0.1], 2, seed=0)


def test_robustness_grows_away_from_minimum():
    obj, system, grid = _hadamard_setup()
    c0 = init_random_controls(system, grid, InitSpec(1.0, 0.3, seed=2))
    res = optimize(obj, system, c0, OptimizerConfig(max_iters=400, grad_tol=1e-8, f_tol=1e-12))
    rep = robustness_scan(obj, system, res.final_controls, [0.0, 0.02, 0.05], 10, seed=1)
    assert rep.mean[1] > rep.mean[0]
    assert rep.mean[2] > rep.mean[1]


def test_writers(tmp_path):
    obj, system, grid = _hadamard_setup()
    res = run_landscape(obj, system, grid, LandscapeConfig(
        3, master_seed=1, optimizer=OptimizerConfig(max_iters=3), bins=2))
    write_values_csv(tmp_path / "v.csv", res)
    write_histogram_csv(tmp_path / "h.csv", res)
    write_clusters_json(tmp_path / "c.json", res)
    rows = list(csv.DictReader(open(tmp_path / "v.csv")))
    assert [int(r["run_index"]) for r in rows] == [0, 1, 2]
    assert [float(r["final_value"]) for r in rows] == res.values.tolist()
    hist = list(csv.DictReader(open(tmp_path / "h.csv")))
    assert list(hist[0]) == ["bin_left", "bin_right", "count"]
    assert sum(int(r["count"]) for r in hist) == 3
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["n_runs"] == 3 and doc["n_aborted"] == 0
    controls = PWCControls(grid, np.zeros((8, 1)), np.zeros((8, 1)))
    write_robustness_csv(tmp_path / "r.csv", robustness_scan(obj, system, controls, [0.0, 0.1], 2, 0))
    rob = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert list(rob[0]) == ["epsilon", "mean", "std"] and len(rob) == 2


class _NanAfterStart(DoubleWell):
    def evaluate(self, system, controls):
        return float("nan") if controls.u[0, 0] > 0 else super().evaluate(system, controls)


def test_aborted_runs_are_reported_but_not_clustered():
    cfg = LandscapeConfig(20, master_seed=4, init=InitSpec(2.0, 0.1),
                          optimizer=OptimizerConfig(max_iters=200))
    res = run_landscape(_NanAfterStart(), preset_qubit(1.0, 0.1), TimeGrid(1.0, 1), cfg)
    assert 0 < res.n_aborted < 20
    assert res.histogram_counts.sum() == 20 - res.n_aborted
    assert sum(c.count for c in res.clusters) == 20 - res.n_aborted

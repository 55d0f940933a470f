import json
import math

import numpy as np
import pytest

from _oracles import first_passage_pmf, lr_steps
from evident.core import bernoulli, kl_divergence
from evident.eprocess import lr_process, ml_plugin_process
from evident.harness import (
    MAX_STORED_PATHS,
    experiment_accumulation,
    experiment_misspec,
    experiment_type1,
    first_crossing,
    lr_log_paths,
    ml_log_paths,
    simulate_symbols,
    ville_frequency,
)
from evident.rng import BLOCK_SIZE, RngStream, blocks, run_blocks, worker_count

P1, P0 = bernoulli(0.65), bernoulli(0.5)


# ---- streams


def test_stream_reproducible_and_distinct():
    a = RngStream(42, 0).generator().random(5)
    b = RngStream(42, 0).generator().random(5)
    c = RngStream(42, 1).generator().random(5)
    d = RngStream(43, 0).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_stream_range():
    RngStream(2 ** 64 - 1, 0)
    with pytest.raises(ValueError):
        RngStream(-1, 0)
    with pytest.raises(ValueError):
        RngStream(0, 2 ** 64)


def test_blocks_cover_reps():
    assert blocks(0) == []
    assert blocks(BLOCK_SIZE + 1) == [(0, BLOCK_SIZE), (1, 1)]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("EVIDENT_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("EVIDENT_THREADS", "0")
    assert worker_count() >= 1


def test_run_blocks_independent_of_threads():
    fn = lambda gen, n: gen.random(n)
    one = np.concatenate(run_blocks(fn, 10_000, 5, threads=1))
    many = np.concatenate(run_blocks(fn, 10_000, 5, threads=4))
    assert np.array_equal(one, many)


def test_simulate_symbols_shape_and_threads():
    a = simulate_symbols(P1, 5000, 30, seed=1, threads=1)
    b = simulate_symbols(P1, 5000, 30, seed=1, threads=2)
    assert a.shape == (5000, 30)
    assert np.array_equal(a, b)
    assert abs(a.mean() - 0.65) < 0.01


# ---- path helpers


def test_lr_log_paths_match_process():
    sym = simulate_symbols(P1, 3, 20, seed=2)
    paths = lr_log_paths(sym, P1, P0)
    for row, traj in zip(sym.tolist(), paths):
        proc = lr_process(P1, P0).feed(row)
        assert np.allclose(proc.trajectory, traj, rtol=0, atol=1e-12)


def test_ml_log_paths_match_process():
    sym = simulate_symbols(P0, 3, 20, seed=2)
    paths = ml_log_paths(sym, P0)
    for row, traj in zip(sym.tolist(), paths):
        proc = ml_plugin_process(P0).feed(row)
        assert np.allclose(proc.trajectory, traj, rtol=0, atol=1e-12)


def test_first_crossing():
    paths = np.array([[0.0, 1.0, 3.0, 2.0], [0.0, 0.5, 0.5, 0.5]])
    tau, crossed = first_crossing(paths, 2.0)
    assert tau.tolist() == [2, 3]
    assert crossed.tolist() == [True, False]


# ---- experiments


def _check_result_shape(res):
    assert set(res.metrics) == set(res.mc_stderr)
    data = json.loads(res.to_json())
    assert {"name", "metrics", "mc_stderr", "reps", "seed", "params"} <= set(data)


def test_accumulation_matches_reported_values():
    res = experiment_accumulation(seed=42)
    _check_result_shape(res)
    assert res.metrics["crossing_fraction"] == pytest.approx(0.97, abs=0.02)
    assert res.metrics["median_tau"] == pytest.approx(50, abs=5)
    assert res.metrics["slope"] == pytest.approx(0.046, abs=0.003)
    up, down = lr_steps(0.65, 0.5)
    exact = first_passage_pmf(0.65, up, down, math.log(20), 200).sum()
    assert abs(res.metrics["crossing_fraction"] - exact) <= 4 * res.mc_stderr["crossing_fraction"]
    # the ML ratio sits above the LR on average
    assert res.metrics["ml_minus_lr_at_T"] > 0


def test_accumulation_trajectories_csv():
    res = experiment_accumulation(seed=1, reps=150, T=20)
    assert set(res.trajectories) == {"lr", "ml"}
    assert res.trajectories["lr"].shape == (MAX_STORED_PATHS, 21)
    lines = res.trajectories_csv("lr").splitlines()
    assert lines[0] == "path_id,t,log_evidence"
    assert len(lines) == 1 + MAX_STORED_PATHS * 21
    assert lines[1].startswith("0,0,")


def test_type1_matches_reported_values():
    res = experiment_type1(seed=42)
    _check_result_shape(res)
    lr = res.metrics["lr_rate"]
    assert lr == pytest.approx(0.042, abs=0.006)
    assert lr <= 0.05 + 3 * res.mc_stderr["lr_rate"]
    assert res.metrics["ml_rate"] == pytest.approx(0.225, abs=0.015)


def test_type1_unreachable_threshold():
    res = experiment_type1(seed=42, reps=2000, T=10, b=1e6)
    assert res.metrics["lr_rate"] == 0.0
    assert res.metrics["ml_rate"] == 0.0


@pytest.mark.parametrize("b", [5, 10, 20, 50])
@pytest.mark.parametrize("T", [50, 300])
def test_type1_lr_within_ville(b, T):
    res = experiment_type1(seed=8, reps=4000, T=T, b=b)
    assert res.metrics["lr_rate"] <= 1 / b + 4 * res.mc_stderr["lr_rate"]


def test_misspec_drift_and_exact_crossing_rate():
    res = experiment_misspec(seed=42)
    _check_result_shape(res)
    assert res.metrics["drift"] == pytest.approx(-0.154, abs=0.01)
    up, down = lr_steps(0.8, 0.5)
    exact = first_passage_pmf(0.55, up, down, math.log(20), 300).sum()
    assert exact == pytest.approx(0.103, abs=1e-3)
    assert abs(res.metrics["crossing_rate"] - exact) <= 4 * res.mc_stderr["crossing_rate"]


def test_misspec_correct_alternative_drift():
    res = experiment_misspec(seed=42, p1=0.55)
    kl = kl_divergence(bernoulli(0.55), P0)
    assert kl == pytest.approx(0.005, abs=1e-3)
    assert abs(res.metrics["drift"] - kl) <= 4 * res.mc_stderr["drift"]


def test_experiments_thread_independent():
    a = experiment_type1(seed=3, reps=6000, T=100, threads=1)
    b = experiment_type1(seed=3, reps=6000, T=100, threads=4)
    assert a.to_json() == b.to_json()


def test_ville_frequency_lr():
    freq = ville_frequency(lambda: lr_process(P1, P0), P0, [5, 10, 20], 2000, 200, seed=4)
    for b, (f, se) in freq.items():
        assert f <= 1 / b + 3 * math.sqrt((1 / b) * (1 - 1 / b) / 2000)
    assert freq[5][0] >= freq[10][0] >= freq[20][0]


def test_ville_frequency_catches_ml_plugin():
    freq = ville_frequency(lambda: ml_plugin_process(P0), P0, [5], 2000, 200, seed=4)
    assert freq[5][0] > 1 / 5 + 3 * math.sqrt(0.2 * 0.8 / 2000)

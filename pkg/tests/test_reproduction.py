"""
Benchmark studies at reduced replication counts

These fit dozens of models and take minutes; run them with `pytest -m slow`.
"""

import numpy as np
import pytest

import cli
from evigp import beta_intervals

pytestmark = pytest.mark.slow


def benchmark_mean(tmp_path, benchmark, **settings):
    cfg = cli.ExperimentConfig.from_mapping({"benchmark": benchmark, "out": str(tmp_path), **settings})
    summary = cli.cmd_benchmark(cfg)
    assert summary["failed"] == 0
    return summary["mean"]


def flagged_terms(benchmark, seed):
    cfg = cli.ExperimentConfig.from_mapping({"benchmark": benchmark, "seed": seed})
    train, _ = cli.generate_data(cfg, seed)
    fit = cli._fit(cfg, train, seed)
    intervals = beta_intervals(fit, level=cfg.level, rng=np.random.default_rng(seed))
    return {t.label for t in intervals if t.flagged}


def test_toy_constant_map_rmspe(tmp_path):
    assert benchmark_mean(tmp_path, "toy", method="map", degree=0, reps=10) == pytest.approx(0.1311, abs=0.05)


def test_toy_linear_post_rmspe(tmp_path):
    assert benchmark_mean(tmp_path, "toy", method="post", degree=1, reps=10) == pytest.approx(0.1195, abs=0.05)


def test_otl_linear_map_rmspe(tmp_path):
    assert benchmark_mean(tmp_path, "otl", degree=1, reps=3) == pytest.approx(0.01399, rel=0.5)


def test_borehole_quadratic_map_rmspe(tmp_path):
    assert benchmark_mean(tmp_path, "borehole", reps=2) == pytest.approx(0.01212, rel=0.5)


def test_borehole_selected_model_rmspe(tmp_path):
    mean = benchmark_mean(tmp_path, "borehole", active_terms=["x1", "x4", "x1*x4"], reps=2)
    assert mean == pytest.approx(0.01019, rel=0.5)


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_otl_selects_the_second_input(seed):
    assert {"x2", "x2^2"} <= flagged_terms("otl", seed)


def test_borehole_selects_radius_and_upper_head():
    runs = [flagged_terms("borehole", seed) for seed in range(10)]
    hits = sum({"1", "x1", "x4", "x1*x4"} <= flagged for flagged in runs)
    assert hits >= 8

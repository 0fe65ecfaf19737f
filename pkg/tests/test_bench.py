import csv
import json

import numpy as np
import pytest

from matnet import bench
from matnet.bench import StudyConfig, run_study, stress_error, write_report
from matnet.errors import InvalidSampleError, TrainingError

TINY = dict(depth=2, teacher_depth=2, epochs=3, n_train=16, n_val=4, batch_size=8, steps=3)


def test_stress_error_examples():
    rng = np.random.default_rng(0)
    ref = [rng.normal(size=(5, 6)) for _ in range(6)]
    assert stress_error(ref, ref) == 0.0
    assert np.isclose(stress_error([2 * r for r in ref], ref), 1.0, rtol=1e-14)
    pred = [r + rng.normal(scale=0.1, size=r.shape) for r in ref]
    manual = np.mean([np.sqrt(((r - p) ** 2).sum()) / np.sqrt((r ** 2).sum())
                      for p, r in zip(pred, ref)])
    assert np.isclose(stress_error(pred, ref), manual, rtol=1e-13)


def test_stress_error_rejects_bad_input():
    z = [np.zeros((3, 6))]
    with pytest.raises(InvalidSampleError):
        stress_error(z, z)
    with pytest.raises(ValueError):
        stress_error([], [])
    with pytest.raises(ValueError):
        stress_error([np.ones((2, 6))], [np.ones((3, 6))])


def test_study_config_validation():
    with pytest.raises(ValueError):
        StudyConfig("nonsense")
    with pytest.raises(ValueError):
        StudyConfig("xi_sweep", seeds=())
    assert StudyConfig("data_size").values == (256, 1024)


def test_single_seed_study_has_zero_spread(tmp_path):
    cfg = StudyConfig("fp_vs_newton", seeds=(1,), **TINY)
    rep = run_study(cfg)
    assert rep.complete and len(rep.cells) == 2
    for v in cfg.values:
        agg = rep.aggregates[v]
        assert agg["n"] == 1
        assert all(s == 0.0 for s in agg["std"].values())
        assert rep.mean(v, "iterations") >= 1
    assert rep.speedup is not None and rep.speedup > 0
    csv_path, json_path, gp_path = write_report(rep, tmp_path)
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    # one row per cell plus mean and std per value
    assert len(rows) == 2 + 2 * 2
    assert json.load(open(json_path))["complete"] is True
    assert "plot" in open(gp_path).read()


def test_failed_cells_are_recorded(monkeypatch):
    def boom(*a, **k):
        raise TrainingError("forced")
    monkeypatch.setattr(bench, "_train_cell", boom)
    rep = run_study(StudyConfig("xi_sweep", seeds=(1, 2), online=False, **TINY))
    assert not rep.complete
    assert len(rep.cells) == 6
    assert all(c["status"] == "failed" and "forced" in c["message"] for c in rep.cells)
    assert np.isnan(rep.mean(1.0, "e_C"))


def test_offline_study_reports_training_metrics():
    rep = run_study(StudyConfig("data_size", seeds=(1,), values=(16, 32), online=False,
                                **{k: v for k, v in TINY.items() if k != "n_train"}))
    assert rep.complete
    for v in (16, 32):
        assert rep.mean(v, "e_C") > 0
        assert 1 <= rep.mean(v, "active_nodes") <= 4
        assert np.isnan(rep.mean(v, "e_sigma"))

import json

import numpy as np
import pytest

from matnet.constitutive import ElasticOrthotropic, stiffness_of
from matnet.datagen import Dataset, SamplingConfig, generate_dataset, sample_orthotropic
from matnet.errors import ConfigError, SchemaError
from matnet.network import DmnParams, ImnParams, forward
from matnet.storage import (load_dataset, load_history, load_model, model_to_dict, save_dataset,
                            save_history, save_model)
from matnet.training import TrainHistory
from matnet.voigt import is_psd, rotate_stiffness

import oracles
from conftest import random_params


def test_degenerate_range_reproduces_fiber():
    cfg = SamplingConfig(E_range=(72.0, 72.0), nu_range=(0.22, 0.22), isotropic=True)
    C = sample_orthotropic(cfg, np.random.default_rng(0))
    expected = stiffness_of(ElasticOrthotropic.isotropic(72.0, 0.22))
    assert np.array_equal(C, expected)


def test_isotropic_samples_commute_with_rotations():
    rng = np.random.default_rng(1)
    cfg = SamplingConfig(isotropic=True)
    for _ in range(20):
        C = sample_orthotropic(cfg, rng)
        a = rng.uniform(-np.pi, np.pi, 3)
        assert np.allclose(oracles.rotate_81(C, oracles.euler_zxz(*a)), C,
                           atol=1e-12 * np.abs(C).max())


def test_samples_are_psd():
    rng = np.random.default_rng(2)
    for _ in range(200):
        C = sample_orthotropic(SamplingConfig(), rng)
        assert is_psd(C) and np.allclose(C, C.T)


def test_impossible_ranges_raise():
    cfg = SamplingConfig(E_range=(1.0, 1.0), G_range=(1.0, 1.0), nu_range=(0.9, 0.9))
    with pytest.raises(ConfigError):
        sample_orthotropic(cfg, np.random.default_rng(0))


def test_targets_from_single_laminate():
    oracle = DmnParams(1, np.array([0.6, 0.4]), np.zeros((3, 3)))
    ds = generate_dataset(oracle, SamplingConfig(n_samples=3, seed=4))
    for j in range(3):
        ref = oracles.bilayer_stiffness(ds.Cp1[j], ds.Cp2[j], 0.6, np.array([0, 0, 1.0]))
        assert np.allclose(ds.C[j], ref, rtol=1e-10)


def test_identical_phases_give_phase_back():
    rng = np.random.default_rng(5)
    oracle = random_params("imn", 3, rng)
    Cp = np.array([sample_orthotropic(SamplingConfig(), rng) for _ in range(4)])
    out = forward(oracle, Cp, Cp)
    assert np.allclose(out, Cp, rtol=1e-11)


def test_dataset_reproducible(tmp_path):
    oracle = random_params("imn", 2, np.random.default_rng(6))
    cfg = SamplingConfig(n_samples=10, seed=9)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    save_dataset(a, generate_dataset(oracle, cfg))
    save_dataset(b, generate_dataset(oracle, cfg))
    assert a.read_bytes() == b.read_bytes()


def test_dataset_split_and_concat():
    rng = np.random.default_rng(7)
    ds = generate_dataset(random_params("imn", 1, rng), SamplingConfig(n_samples=10, seed=1))
    tr, va = ds.split(0.2)
    assert len(tr) == 8 and len(va) == 2
    assert np.array_equal(va.C, ds.C[8:])
    assert np.array_equal(tr.concat(va).C, ds.C)
    with pytest.raises(ValueError):
        ds.subset(slice(0, 1)).split(0.9)


# -- storage ------------------------------------------------------------------------

@pytest.mark.parametrize("model_type", ["dmn", "imn"])
def test_model_round_trip(tmp_path, model_type):
    p = random_params(model_type, 3, np.random.default_rng(8), dead=2)
    save_model(tmp_path / "m.json", p)
    q = load_model(tmp_path / "m.json")
    assert type(q) is type(p)
    assert np.array_equal(q.to_vector(), p.to_vector())


def test_model_json_fields():
    d = model_to_dict(ImnParams(1, np.ones(2), np.zeros(1), np.zeros(1)))
    assert list(d)[:6] == ["format_version", "model_type", "depth", "voigt_order",
                           "euler_convention", "z"]
    assert d["voigt_order"] == "11,22,33,23,13,12"


def test_legacy_model_version_rejected(tmp_path):
    d = model_to_dict(random_params("imn", 1, np.random.default_rng(9)))
    d["format_version"] = 0
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(SchemaError, match="unsupported format_version"):
        load_model(tmp_path / "m.json")
    del d["format_version"]
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(SchemaError):
        load_model(tmp_path / "m.json")


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    ds = generate_dataset(random_params("dmn", 2, rng), SamplingConfig(n_samples=6, seed=3))
    save_dataset(tmp_path / "d.csv", ds)
    back = load_dataset(tmp_path / "d.csv")
    for a, b in ((ds.Cp1, back.Cp1), (ds.Cp2, back.Cp2), (ds.C, back.C)):
        assert np.abs(a - b).max() <= 1e-15 * np.abs(a).max()
    assert back.oracle_id == ds.oracle_id and back.seed == 3


def test_single_sample_dataset_file(tmp_path):
    rng = np.random.default_rng(11)
    ds = generate_dataset(random_params("imn", 1, rng), SamplingConfig(n_samples=1))
    save_dataset(tmp_path / "d.csv", ds)
    assert len((tmp_path / "d.csv").read_text().splitlines()) == 2


def test_malformed_dataset_rows(tmp_path):
    rng = np.random.default_rng(12)
    ds = generate_dataset(random_params("imn", 1, rng), SamplingConfig(n_samples=2))
    path = tmp_path / "d.csv"
    save_dataset(path, ds)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:2] + [lines[2].rsplit(",", 1)[0]]) + "\n")
    with pytest.raises(SchemaError, match="row 2"):
        load_dataset(path)
    path.write_text("\n".join(lines[:2] + ["2" + lines[2][1:]]) + "\n")
    with pytest.raises(SchemaError, match="unsupported format_version"):
        load_dataset(path)
    bad = lines[2].split(",")
    bad[4] = "-5.0"
    path.write_text("\n".join(lines[:2] + [",".join(bad)]) + "\n")
    with pytest.raises(SchemaError, match="positive semidefinite"):
        load_dataset(path)


def test_history_round_trip(tmp_path):
    h = TrainHistory()
    for e in range(1, 4):
        h.append(e, 1.0 / e, 2.0 / e, 0.1 / e, 0.2 / e, 1e-2 * 0.8 ** e)
    save_history(tmp_path / "h.csv", h)
    assert load_history(tmp_path / "h.csv").rows() == h.rows()


def test_history_wrong_header(tmp_path):
    (tmp_path / "h.csv").write_text("epoch,loss\n1,2\n")
    with pytest.raises(SchemaError):
        load_history(tmp_path / "h.csv")


def test_rotated_dataset_targets_stay_psd():
    rng = np.random.default_rng(13)
    C = sample_orthotropic(SamplingConfig(), rng)
    assert is_psd(rotate_stiffness(rng.uniform(-3, 3, 3), C))

"""Persistence of models (JSON), datasets and histories (CSV).

All artifacts carry ``format_version``; floats are written with ``repr`` so
round trips are exact.
"""
import csv
import json

import numpy as np

from .datagen import Dataset
from .errors import SchemaError
from .network import DmnParams, ImnParams
from .voigt import EULER_CONVENTION, is_psd

FORMAT_VERSION = 1
VOIGT_ORDER_LABEL = "11,22,33,23,13,12"

_UPPER = [(i, j) for i in range(6) for j in range(i, 6)]
_MATRIX_PREFIXES = ("p1", "p2", "C")
DATASET_COLUMNS = (["format_version", "sample_id", "oracle_id", "seed"]
                   + [f"{p}_{i + 1}{j + 1}" for p in _MATRIX_PREFIXES for i, j in _UPPER])
HISTORY_COLUMNS = ["format_version", "epoch", "train_loss", "val_loss", "e_C",
                   "e_C_train", "lr"]


def _check_version(found, what):
    try:
        found = int(found)
    except (TypeError, ValueError):
        raise SchemaError(f"{what}: missing or malformed format_version {found!r}")
    if found != FORMAT_VERSION:
        raise SchemaError(f"{what}: unsupported format_version {found} "
                          f"(this build reads version {FORMAT_VERSION})")


# -- models -----------------------------------------------------------------

def model_to_dict(params):
    d = {
        "format_version": FORMAT_VERSION,
        "model_type": params.model_type,
        "depth": int(params.depth),
        "voigt_order": VOIGT_ORDER_LABEL,
        "euler_convention": EULER_CONVENTION,
        "z": [float(x) for x in params.z],
    }
    if params.model_type == "dmn":
        d["angles"] = [[float(x) for x in row] for row in params.angles]
    else:
        d["theta"] = [float(x) for x in params.theta]
        d["phi"] = [float(x) for x in params.phi]
    return d


def model_from_dict(d):
    _check_version(d.get("format_version"), "model")
    try:
        kind = d["model_type"]
        if kind == "dmn":
            return DmnParams(int(d["depth"]), np.array(d["z"], dtype=float),
                             np.array(d["angles"], dtype=float))
        if kind == "imn":
            return ImnParams(int(d["depth"]), np.array(d["z"], dtype=float),
                             np.array(d["theta"], dtype=float), np.array(d["phi"], dtype=float))
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"model: {exc}") from exc
    raise SchemaError(f"model: unknown model_type {kind!r}")


def save_model(path, params):
    with open(path, "w") as fh:
        json.dump(model_to_dict(params), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


# -- datasets ---------------------------------------------------------------

def _upper(C):
    return [repr(float(C[i, j])) for i, j in _UPPER]


def _from_upper(values):
    C = np.empty((6, 6))
    for (i, j), v in zip(_UPPER, values):
        C[i, j] = C[j, i] = v
    return C


def save_dataset(path, ds):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_COLUMNS)
        for j in range(len(ds)):
            writer.writerow([FORMAT_VERSION, j, ds.oracle_id, ds.seed]
                            + _upper(ds.Cp1[j]) + _upper(ds.Cp2[j]) + _upper(ds.C[j]))


def load_dataset(path):
    Cp1, Cp2, C = [], [], []
    oracle_id, seed = "", -1
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:1] != ["format_version"]:
            raise SchemaError("dataset: missing header with format_version column")
        if header != DATASET_COLUMNS:
            raise SchemaError("dataset: unexpected column layout")
        for row_no, row in enumerate(reader, start=1):
            _check_version(row[0] if row else None, f"dataset row {row_no}")
            if len(row) != len(DATASET_COLUMNS):
                raise SchemaError(f"dataset row {row_no}: expected {len(DATASET_COLUMNS)} "
                                  f"fields, got {len(row)}")
            try:
                vals = [float(x) for x in row[4:]]
                seed = int(row[3])
            except ValueError as exc:
                raise SchemaError(f"dataset row {row_no}: {exc}") from exc
            oracle_id = row[2]
            mats = [_from_upper(vals[21 * q:21 * (q + 1)]) for q in range(3)]
            for name, M in zip(_MATRIX_PREFIXES, mats):
                if not np.all(np.isfinite(M)) or not is_psd(M):
                    raise SchemaError(f"dataset row {row_no}: matrix {name} is not "
                                      "symmetric positive semidefinite")
            Cp1.append(mats[0])
            Cp2.append(mats[1])
            C.append(mats[2])
    if not C:
        raise SchemaError("dataset: no samples")
    return Dataset(np.array(Cp1), np.array(Cp2), np.array(C), oracle_id, seed)


# -- training histories -----------------------------------------------------

def save_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for row in history.rows():
            writer.writerow([FORMAT_VERSION] + [row[0]] + [repr(float(x)) for x in row[1:]])


def load_history(path):
    from .training import TrainHistory

    hist = TrainHistory()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HISTORY_COLUMNS:
            raise SchemaError("history: unexpected column layout")
        for row_no, row in enumerate(reader, start=1):
            _check_version(row[0] if row else None, f"history row {row_no}")
            try:
                hist.append(int(row[1]), *(float(x) for x in row[2:]))
            except (ValueError, TypeError) as exc:
                raise SchemaError(f"history row {row_no}: {exc}") from exc
    return hist

"""Seeded comparative studies: training sweeps and online-solver comparisons.

Ground truth comes from a fixed teacher network: its homogenized stiffness
generates the training data, and its six-path elastoplastic response (IMN
Newton, or DMN with residual stress) is the reference for the stress error.
"""
import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .datagen import SamplingConfig, generate_dataset
from .errors import InvalidSampleError, MatNetError
from .network import Topology, count_active_nodes
from .online import SolverConfig, run_loading_path, six_paths
from .presets import load_preset
from .training import LossConfig, TrainConfig, init_teacher, mean_relative_error, train

log = logging.getLogger(__name__)

STUDIES = ("batch_size", "data_size", "eta_sweep", "xi_sweep", "depth_compare",
           "residual_stress", "fp_vs_newton", "dmn_vs_imn")
DEFAULT_VALUES = {
    "batch_size": [20, 40, 128],
    "data_size": [256, 1024],
    "eta_sweep": [0.1, 1.0, 10.0],
    "xi_sweep": [0.5, 1.0, 2.0],
    "depth_compare": [4, 5, 6],
    "residual_stress": ["dmn_residual", "dmn_no_residual"],
    "fp_vs_newton": ["imn_fixed_point", "imn_newton"],
    "dmn_vs_imn": ["dmn", "imn"],
}
METRICS = ("e_C", "e_sigma", "iterations", "active_nodes", "time_per_iter_node_ns")
REPORT_COLUMNS = ["study", "value", "seed", "kind", *METRICS, "status", "message"]
_DEFAULT_SCHEME = {"imn": "imn_newton", "dmn": "dmn_residual"}


@dataclass(frozen=True)
class StudyConfig:
    study: str
    seeds: tuple = (1, 2, 3, 4, 5)
    values: tuple = None
    composite: str = "composite2"
    amplitude: float = 0.02
    steps: int = 20
    model_type: str = "imn"
    depth: int = 4
    epochs: int = 2000
    batch_size: int = 40
    n_train: int = 400
    n_val: int = 100
    eta: float = 1.0
    xi: float = 1.0
    teacher_type: str = "imn"
    teacher_depth: int = 4
    teacher_seed: int = 1000
    teacher_inactive: float = 0.5
    data_seed: int = 7
    isotropic_phases: bool = True
    online: bool = True
    tol: float = 1e-6

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}; choose from {STUDIES}")
        if len(self.seeds) < 1:
            raise ValueError("need at least one seed")
        if self.values is None:
            object.__setattr__(self, "values", tuple(DEFAULT_VALUES[self.study]))

    def to_dict(self):
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["values"] = list(self.values)
        return d


@dataclass
class StudyReport:
    config: StudyConfig
    cells: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    speedup: float = None

    @property
    def complete(self):
        return all(c["status"] == "ok" for c in self.cells)

    def mean(self, value, metric):
        return self.aggregates[str(value)]["mean"][metric]


# -- metrics ------------------------------------------------------------------

def stress_error(predicted, reference):
    """Mean over loading paths of ||sig - sig_hat|| / ||sig|| (whole histories)."""
    if len(predicted) != len(reference) or len(reference) == 0:
        raise ValueError("need matching, nonempty lists of paths")
    total = 0.0
    for pred, ref in zip(predicted, reference):
        pred, ref = np.asarray(pred, dtype=float), np.asarray(ref, dtype=float)
        if pred.shape != ref.shape:
            raise ValueError("path lengths differ")
        nrm = np.linalg.norm(ref)
        if nrm == 0.0:
            raise InvalidSampleError("reference stress path has zero norm")
        total += np.linalg.norm(ref - pred) / nrm
    return total / len(reference)


def six_path_run(params, materials, scheme, amplitude=0.02, steps=20, tol=1e-6):
    """Run the six standard paths; returns ``{name: LoadingResult}``."""
    cfg = SolverConfig(tol=tol, scheme=scheme)
    return {name: run_loading_path(params, materials, path, cfg)
            for name, path in six_paths(amplitude, steps).items()}


def _online_metrics(runs):
    iters = np.concatenate([r.iterations for r in runs.values()])
    elapsed = sum(int(r.elapsed_ns.sum()) for r in runs.values())
    active = next(iter(runs.values())).active_nodes
    return {
        "iterations": float(iters.mean()),
        "active_nodes": active,
        "time_per_iter_node_ns": float(elapsed / (iters.sum() * active)),
        "elapsed_ns": elapsed,
    }


# -- cells ----------------------------------------------------------------------

def _cell_setup(cfg, value):
    """Training overrides and online scheme for one sweep value."""
    model_type, scheme = cfg.model_type, None
    over = {}
    s = cfg.study
    if s == "batch_size":
        over["batch_size"] = int(value)
    elif s == "data_size":
        over["n_train"] = int(value)
    elif s == "eta_sweep":
        over["eta"] = float(value)
    elif s == "xi_sweep":
        over["xi"] = float(value)
    elif s == "depth_compare":
        over["depth"] = int(value)
    elif s == "residual_stress":
        model_type, scheme = "dmn", str(value)
    elif s == "fp_vs_newton":
        model_type, scheme = "imn", str(value)
    elif s == "dmn_vs_imn":
        model_type = str(value)
    return replace(cfg, model_type=model_type, **over), scheme or _DEFAULT_SCHEME[model_type]


def teacher_of(cfg):
    return init_teacher(cfg.teacher_type, Topology(cfg.teacher_depth), cfg.teacher_seed,
                        cfg.teacher_inactive)


def _dataset(cfg, teacher):
    # the validation block is shared across data sizes: drawn first, stored last
    scfg = SamplingConfig(isotropic=cfg.isotropic_phases)
    val = generate_dataset(teacher, replace(scfg, n_samples=cfg.n_val, seed=cfg.data_seed))
    tr = generate_dataset(teacher, replace(scfg, n_samples=cfg.n_train, seed=cfg.data_seed + 1))
    return tr.concat(val), cfg.n_val / (cfg.n_train + cfg.n_val)


def _train_cell(cfg, seed, teacher):
    data, vfrac = _dataset(cfg, teacher)
    tcfg = TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size, seed=seed,
                       validation_fraction=vfrac)
    res = train(cfg.model_type, Topology(cfg.depth), data, tcfg, LossConfig(cfg.eta, cfg.xi))
    _, val = data.split(vfrac)
    return res.params, mean_relative_error(res.params, val)


def _reference_paths(cfg, teacher, materials):
    scheme = _DEFAULT_SCHEME[teacher.model_type]
    runs = six_path_run(teacher, materials, scheme, cfg.amplitude, cfg.steps, min(cfg.tol, 1e-8))
    return [r.stress for r in runs.values()]


def _blank_row(cfg, value, seed):
    row = {"study": cfg.study, "value": value, "seed": seed, "kind": "cell"}
    row.update({m: float("nan") for m in METRICS})
    return row


def _run_group(args):
    """Train once for a (training config, seed) and evaluate each sweep value."""
    cfg, ccfg, values, seed = args
    rows = []
    try:
        teacher = teacher_of(cfg)
        params, e_c = _train_cell(ccfg, seed, teacher)
        materials = load_preset(cfg.composite) if cfg.online else None
        ref = _reference_paths(cfg, teacher, materials) if cfg.online else None
    except (MatNetError, ArithmeticError, ValueError) as exc:
        log.warning("%s seed %s: training failed: %s", cfg.study, seed, exc)
        for v in values:
            row = _blank_row(cfg, v, seed)
            row["status"], row["message"] = "failed", f"{type(exc).__name__}: {exc}"
            rows.append(row)
        return rows
    for v in values:
        row = _blank_row(cfg, v, seed)
        row["e_C"] = e_c
        row["active_nodes"] = count_active_nodes(params)
        try:
            if cfg.online:
                scheme = _cell_setup(cfg, v)[1]
                runs = six_path_run(params, materials, scheme, cfg.amplitude, cfg.steps, cfg.tol)
                row["e_sigma"] = float(stress_error([r.stress for r in runs.values()], ref))
                row.update(_online_metrics(runs))
            row["status"], row["message"] = "ok", ""
        except (MatNetError, ArithmeticError, ValueError) as exc:
            log.warning("%s=%s seed %s failed: %s", cfg.study, v, seed, exc)
            row["status"], row["message"] = "failed", f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def _aggregate(cells, values):
    out = {}
    for v in values:
        ok = [c for c in cells if c["value"] == v and c["status"] == "ok"]
        agg = {"n": len(ok), "mean": {}, "std": {}}
        for m in METRICS:
            xs = np.array([c[m] for c in ok], dtype=float)
            agg["mean"][m] = float(xs.mean()) if xs.size else float("nan")
            agg["std"][m] = float(xs.std()) if xs.size else float("nan")
        out[str(v)] = agg
    return out


def run_study(cfg, threads=1):
    """Run every (value, seed) cell of a study and aggregate over seeds."""
    groups = {}
    for v in cfg.values:
        groups.setdefault(_cell_setup(cfg, v)[0], []).append(v)
    jobs = [(cfg, ccfg, vals, s) for ccfg, vals in groups.items() for s in cfg.seeds]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as ex:
            results = list(ex.map(_run_group, jobs))
    else:
        results = [_run_group(j) for j in jobs]
    order = {(v, s): i for i, (v, s) in enumerate((v, s) for v in cfg.values for s in cfg.seeds)}
    cells = sorted((row for rows in results for row in rows),
                   key=lambda r: order[(r["value"], r["seed"])])
    report = StudyReport(cfg, cells, _aggregate(cells, cfg.values))
    if cfg.study in ("residual_stress", "fp_vs_newton") and cfg.online:
        slow, fast = cfg.values[0], cfg.values[-1]
        t = {v: np.nansum([c.get("elapsed_ns", np.nan) for c in cells if c["value"] == v])
             for v in (slow, fast)}
        if t[fast] > 0:
            report.speedup = float(t[slow] / t[fast])
    return report


# -- output --------------------------------------------------------------------

def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_report(report, out_dir):
    """Write report.csv, report.json and a gnuplot recipe; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "report.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for c in report.cells:
            w.writerow([_fmt(c.get(k, "")) for k in REPORT_COLUMNS])
        for v, agg in report.aggregates.items():
            for kind in ("mean", "std"):
                w.writerow([report.config.study, v, "", kind]
                           + [_fmt(agg[kind][m]) for m in METRICS] + [f"n={agg['n']}", ""])
    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w") as fh:
        json.dump({"config": report.config.to_dict(), "complete": report.complete,
                   "speedup": report.speedup, "cells": report.cells,
                   "aggregates": report.aggregates}, fh, indent=1, default=_json_default)
        fh.write("\n")
    gp_path = os.path.join(out_dir, "plot.gp")
    with open(gp_path, "w") as fh:
        fh.write(_gnuplot_recipe(report))
    return csv_path, json_path, gp_path


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(type(x))


def _gnuplot_recipe(report):
    """Self-contained gnuplot script with the aggregates inlined."""
    study = report.config.study
    lines = [f"# mean and std over seeds for study '{study}'",
             "# columns: index value " + " ".join(f"{m}_mean {m}_std" for m in METRICS),
             "$agg << EOD"]
    for i, (v, agg) in enumerate(report.aggregates.items()):
        cols = " ".join(f"{agg['mean'][m]!r} {agg['std'][m]!r}" for m in METRICS)
        lines.append(f"{i} {v} {cols}")
    lines += ["EOD", "set multiplot layout 2,2 title '%s'" % study, "set offsets 0.5, 0.5, 0, 0"]
    for j, m in enumerate(("e_C", "e_sigma", "iterations", "time_per_iter_node_ns")):
        c = 3 + 2 * METRICS.index(m)
        lines += [f"set title '{m}'",
                  f"plot $agg using 1:{c}:{c + 1}:xtic(2) with yerrorlines notitle"]
    lines += ["unset multiplot", ""]
    return "\n".join(lines)

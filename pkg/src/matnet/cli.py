"""Command-line entry point: ``matnet {gen-data,train,predict,bench,inspect}``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""
import argparse
import csv
import json
import logging
import os
import sys
import traceback

from . import __version__
from .errors import (ConfigError, ConvergenceError, DegenerateNetworkError, MatNetError,
                     SchemaError, SingularInterfaceError, TrainingError)

log = logging.getLogger("matnet")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
PREDICTION_COLUMNS = (["step"] + [f"eps_{c}" for c in ("11", "22", "33", "23", "13", "12")]
                      + [f"sig_{c}" for c in ("11", "22", "33", "23", "13", "12")]
                      + ["iterations", "active_nodes", "elapsed_ns"])


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(name):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer")
        if v < 1:
            raise argparse.ArgumentTypeError(f"{name} must be ≥ 1")
        return v
    return parse


def build_parser():
    p = _Parser(prog="matnet", description="Material network training and online prediction.")
    p.add_argument("--version", action="version", version=f"matnet {__version__}")
    p.add_argument("--seed", type=int, default=0, help="global random seed (default 0)")
    p.add_argument("--out-dir", default=".", help="directory for outputs (default .)")
    p.add_argument("--threads", type=_positive_int("threads"), default=os.cpu_count() or 1,
                   help="parallel study cells (default: logical cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="sample phases and label them with a teacher network")
    g.add_argument("--teacher", help="teacher model.json; otherwise a random teacher is drawn")
    g.add_argument("--teacher-type", choices=("imn", "dmn"), default="imn")
    g.add_argument("--teacher-depth", type=_positive_int("depth"), default=4)
    g.add_argument("--teacher-seed", type=int, default=1000)
    g.add_argument("--teacher-inactive", type=float, default=0.5,
                   help="fraction of the random teacher's base nodes switched off")
    g.add_argument("--samples", type=_positive_int("samples"), default=500)
    g.add_argument("--isotropic", action="store_true", help="isotropic phases only")
    g.add_argument("--E-range", type=float, nargs=2, default=(1.0, 500.0), metavar=("LO", "HI"))
    g.add_argument("--G-range", type=float, nargs=2, default=(0.3, 200.0), metavar=("LO", "HI"))
    g.add_argument("--nu-range", type=float, nargs=2, default=(0.0, 0.45), metavar=("LO", "HI"))
    g.add_argument("--output", default="dataset.csv", help="file name inside --out-dir")

    t = sub.add_parser("train", help="fit a network to a stiffness dataset")
    t.add_argument("--model", choices=("imn", "dmn"), required=True)
    t.add_argument("--depth", type=_positive_int("depth"), required=True)
    t.add_argument("--data", required=True, help="dataset CSV")
    t.add_argument("--epochs", type=_positive_int("epochs"), default=10000)
    t.add_argument("--batch-size", type=_positive_int("batch size"), default=40)
    t.add_argument("--lr", type=float, default=1e-2)
    t.add_argument("--lr-factor", type=float, default=0.8)
    t.add_argument("--patience", type=_positive_int("patience"), default=50)
    t.add_argument("--validation-fraction", type=float, default=0.2)
    t.add_argument("--eta", type=float, default=1.0)
    t.add_argument("--xi", type=float, default=1.0)
    t.add_argument("--kernels", choices=("auto", "cython", "numpy"), default="auto")

    r = sub.add_parser("predict", help="run the six standard loading paths")
    r.add_argument("--model", required=True, help="model.json")
    r.add_argument("--composite", default="composite2", help="preset name or JSON path")
    r.add_argument("--scheme", choices=("dmn_residual", "dmn_no_residual", "imn_fixed_point",
                                        "imn_newton"))
    r.add_argument("--tol", type=float, default=1e-6)
    r.add_argument("--max-iter", type=_positive_int("max-iter"), default=100)
    r.add_argument("--amplitude", type=float, default=0.02)
    r.add_argument("--steps", type=_positive_int("steps"), default=20)

    b = sub.add_parser("bench", help="run a seeded comparative study")
    b.add_argument("--study", required=True)
    b.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    b.add_argument("--values", nargs="+", help="sweep values (default per study)")
    b.add_argument("--composite", default="composite2")
    b.add_argument("--amplitude", type=float, default=0.02)
    b.add_argument("--steps", type=_positive_int("steps"), default=20)
    b.add_argument("--model-type", choices=("imn", "dmn"), default="imn")
    b.add_argument("--depth", type=_positive_int("depth"), default=4)
    b.add_argument("--epochs", type=_positive_int("epochs"), default=2000)
    b.add_argument("--batch-size", type=_positive_int("batch size"), default=40)
    b.add_argument("--n-train", type=_positive_int("n-train"), default=400)
    b.add_argument("--n-val", type=_positive_int("n-val"), default=100)
    b.add_argument("--teacher-type", choices=("imn", "dmn"), default="imn")
    b.add_argument("--teacher-seed", type=int, default=1000)
    b.add_argument("--teacher-inactive", type=float, default=0.5)
    b.add_argument("--orthotropic", action="store_true",
                   help="sample orthotropic instead of isotropic phases")
    b.add_argument("--no-online", action="store_true", help="skip the loading-path runs")
    b.add_argument("--full-scale", action="store_true",
                   help="10000 epochs, depths 4-8, 10 seeds")

    i = sub.add_parser("inspect", help="summarize a model, dataset or history file")
    i.add_argument("path")
    return p


# -- helpers -----------------------------------------------------------------------

def _snapshot(args, argv, extra=None):
    os.makedirs(args.out_dir, exist_ok=True)
    d = {"command": args.command, "argv": list(argv), "version": __version__,
         "resolved": {k: v for k, v in vars(args).items() if k != "verbose"}}
    if extra:
        d.update(extra)
    with open(os.path.join(args.out_dir, "config.json"), "w") as fh:
        json.dump(d, fh, indent=1, sort_keys=True, default=list)
        fh.write("\n")


def _out(args, name):
    return os.path.join(args.out_dir, name)


# -- subcommands --------------------------------------------------------------------

def cmd_gen_data(args, argv):
    from .datagen import SamplingConfig, generate_dataset
    from .network import Topology
    from .storage import load_model, save_dataset, save_model
    from .training import init_teacher

    if args.teacher:
        teacher = load_model(args.teacher)
    else:
        teacher = init_teacher(args.teacher_type, Topology(args.teacher_depth),
                               args.teacher_seed, args.teacher_inactive)
    cfg = SamplingConfig(tuple(args.E_range), tuple(args.G_range), tuple(args.nu_range),
                         args.isotropic, args.samples, args.seed)
    ds = generate_dataset(teacher, cfg)
    _snapshot(args, argv, {"oracle_id": ds.oracle_id})
    save_dataset(_out(args, args.output), ds)
    save_model(_out(args, "teacher.json"), teacher)
    print(f"wrote {len(ds)} samples to {_out(args, args.output)} (oracle {ds.oracle_id})")
    return EXIT_OK


def cmd_train(args, argv):
    from .kernels import get_backend
    from .network import Topology
    from .storage import load_dataset, save_history, save_model
    from .training import LossConfig, TrainConfig, train

    try:
        cfg = TrainConfig(args.epochs, args.batch_size, args.lr, args.lr_factor, args.patience,
                          args.seed, args.validation_fraction)
        loss_cfg = LossConfig(args.eta, args.xi)
    except ValueError as exc:
        raise UsageError(str(exc))
    backend = None if args.kernels == "auto" else get_backend(args.kernels)
    data = load_dataset(args.data)
    _snapshot(args, argv)

    def progress(epoch, hist):
        if epoch % max(1, args.epochs // 20) == 0:
            log.info("epoch %d  val loss %.4e  e_C %.4e  lr %.2e", epoch, hist.val_loss[-1],
                     hist.e_C[-1], hist.lr[-1])

    res = train(args.model, Topology(args.depth), data, cfg, loss_cfg, backend=backend,
                progress=progress)
    save_model(_out(args, "model.json"), res.params)
    save_model(_out(args, "model_final.json"), res.final_params)
    save_history(_out(args, "history.csv"), res.history)
    print(f"best epoch {res.best_epoch}: validation e_C {min(res.history.e_C):.4e} "
          f"(initial {res.initial_e_C:.4e})")
    return EXIT_OK


def cmd_predict(args, argv):
    from .presets import load_preset
    from .storage import load_model

    params = load_model(args.model)
    scheme = args.scheme or ("imn_newton" if params.model_type == "imn" else "dmn_residual")
    if not scheme.startswith(params.model_type):
        raise UsageError(f"scheme {scheme} does not apply to {params.model_type} models")
    if not args.tol > 0:
        raise UsageError("tol must be positive")
    materials = load_preset(args.composite)
    _snapshot(args, argv, {"scheme": scheme})
    from .online import SolverConfig, run_loading_path, six_paths
    cfg = SolverConfig(args.tol, args.max_iter, scheme)
    for name, path in six_paths(args.amplitude, args.steps).items():
        res = run_loading_path(params, materials, path, cfg)
        write_prediction_csv(_out(args, f"pred_{name}.csv"), res)
        print(f"{name}: {res.total_iterations} iterations, final stress "
              + " ".join(f"{x:.4e}" for x in res.stress[-1]))
    return EXIT_OK


def write_prediction_csv(path, res):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for k in range(len(res.iterations)):
            w.writerow([k + 1] + [repr(float(x)) for x in res.strain[k]]
                       + [repr(float(x)) for x in res.stress[k]]
                       + [int(res.iterations[k]), res.active_nodes, int(res.elapsed_ns[k])])


def cmd_bench(args, argv):
    from .bench import STUDIES, StudyConfig, run_study, write_report

    if args.study not in STUDIES:
        raise UsageError(f"unknown study {args.study!r}; choose from {', '.join(STUDIES)}")
    kw = {}
    if args.values:
        kw["values"] = tuple(_parse_value(v) for v in args.values)
    seeds, epochs = tuple(args.seeds), args.epochs
    if args.full_scale:
        epochs = 10000
        seeds = tuple(range(1, 11))
        if args.study == "depth_compare" and not args.values:
            kw["values"] = (4, 5, 6, 7, 8)
    cfg = StudyConfig(args.study, seeds, composite=args.composite, amplitude=args.amplitude,
                      steps=args.steps, model_type=args.model_type, depth=args.depth,
                      epochs=epochs, batch_size=args.batch_size, n_train=args.n_train,
                      n_val=args.n_val, teacher_type=args.teacher_type,
                      teacher_seed=args.teacher_seed,
                      teacher_inactive=args.teacher_inactive, isotropic_phases=not args.orthotropic,
                      online=not args.no_online, **kw)
    _snapshot(args, argv, {"study_config": cfg.to_dict()})
    report = run_study(cfg, threads=args.threads)
    paths = write_report(report, args.out_dir)
    for v, agg in report.aggregates.items():
        m = agg["mean"]
        print(f"{v}: e_C {m['e_C']:.4e}  e_sigma {m['e_sigma']:.4e}  "
              f"iterations {m['iterations']:.2f}  active {m['active_nodes']:.1f}  (n={agg['n']})")
    if report.speedup is not None:
        print(f"speed-up {report.speedup:.2f}x")
    print("wrote " + ", ".join(paths))
    if not report.complete:
        print("warning: some cells failed; see report.json", file=sys.stderr)
    return EXIT_OK


def _parse_value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def cmd_inspect(args, argv):
    from .network import count_active_nodes, dmn_param_count, imn_param_count
    from .storage import load_dataset, load_history, load_model

    path = args.path
    if path.endswith(".json"):
        params = load_model(path)
        expected = (dmn_param_count if params.model_type == "dmn" else imn_param_count)(params.depth)
        n = params.n_params
        if n != expected:
            raise SchemaError(f"parameter count {n} differs from expected {expected}")
        print(f"model type:      {params.model_type}")
        print(f"depth:           {params.depth}")
        print(f"parameters:      {n}")
        print(f"active nodes:    {count_active_nodes(params)} of {2 ** params.depth}")
    elif path.endswith(".csv"):
        with open(path) as fh:
            header = fh.readline()
        if "train_loss" in header:
            h = load_history(path)
            print(f"history: {len(h)} epochs, final val loss {h.val_loss[-1]:.4e}, "
                  f"min e_C {min(h.e_C):.4e}, final lr {h.lr[-1]:.3e}")
        else:
            ds = load_dataset(path)
            print(f"dataset: {len(ds)} samples, oracle {ds.oracle_id}, seed {ds.seed}")
    else:
        raise UsageError("inspect expects a .json model or a .csv dataset/history")
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "predict": cmd_predict,
            "bench": cmd_bench, "inspect": cmd_inspect}
_NUMERIC = (ConvergenceError, TrainingError, SingularInterfaceError, DegenerateNetworkError,
            ArithmeticError)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"matnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"matnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC as exc:
        diag = _write_diagnostic(args, exc)
        print(f"matnet: numerical failure: {exc}\ndiagnostics: {diag}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SchemaError, ConfigError, MatNetError, OSError, ValueError) as exc:
        print(f"matnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _write_diagnostic(args, exc):
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "diagnostic.json")
    d = {"command": args.command, "error": type(exc).__name__, "message": str(exc),
         "traceback": traceback.format_exception(type(exc), exc, exc.__traceback__)}
    for attr in ("residual", "iterations", "epoch", "step"):
        if getattr(exc, attr, None) is not None:
            d[attr] = getattr(exc, attr)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=1, default=str)
        fh.write("\n")
    return path


if __name__ == "__main__":
    sys.exit(main())

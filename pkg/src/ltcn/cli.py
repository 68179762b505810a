"""Command-line entry point: ``ltcn <subcommand> [flags]``.

Every command that writes a file also writes ``<out>.manifest.json`` holding
the resolved flags, so the run can be replayed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__, dynamics, evaluation, synthetic
from . import model as ltcn_model
from .dataset import DatasetError, RawTable, build_dataset, load_csv, make_folds, read_feature_rows
from .dynamics import ReasoningConfig
from .transfer import KINDS, TransferFunction

log = logging.getLogger("ltcn")

HEAD_FLAGS = {"recurrence": ltcn_model.RECURRENCE, "laststate": ltcn_model.LAST_STATE}


class CliError(Exception):
    pass


def _phi(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--phi expects a number, got {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"--phi must lie in [0, 1], got {value}")
    return value


def _grid(text):
    try:
        start, stop, step = (float(v) for v in text.split(":"))
        values = evaluation.phi_grid(start, stop, step)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"--phi-grid expects start:end:step with step > 0, got {text!r}") from None
    if not values or min(values) < 0.0 or max(values) > 1.0:
        raise argparse.ArgumentTypeError(f"--phi-grid values must lie in [0, 1], got {text!r}")
    return values


def _positive_int(name):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} expects an integer, got {text!r}") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1, got {value}")
        return value
    return parse


def _positive_float(name):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} expects a number, got {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"{name} must be > 0, got {value}")
        return value
    return parse


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--iters-grid expects comma-separated integers") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("--iters-grid values must be >= 1")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltcn", description="LTCN classifier with a recurrence-aware decision head.")
    parser.add_argument("--version", action="version", version=f"ltcn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def csv_flags(p):
        p.add_argument("--delimiter", default=",")
        p.add_argument("--no-header", dest="header", action="store_false")

    def reasoning_flags(p, with_phi=True):
        if with_phi:
            p.add_argument("--phi", type=_phi, default=0.8)
        p.add_argument("--transfer", choices=KINDS, default="sigmoid")
        p.add_argument("--iters", type=_positive_int("--iters"), default=20)
        p.add_argument("--tol", type=_positive_float("--tol"), default=1e-5)
        p.add_argument("--cycle-window", type=_positive_int("--cycle-window"), default=10)
        p.add_argument("--epsilon", type=_positive_float("--epsilon"), default=1e-3)

    def cv_flags(p):
        p.add_argument("--folds", type=_positive_int("--folds"), default=5)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=_positive_int("--jobs"), default=os.cpu_count() or 1)

    p = sub.add_parser("train", help="fit a model on a labelled CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--head", choices=sorted(HEAD_FLAGS), default="recurrence")
    reasoning_flags(p)
    csv_flags(p)

    p = sub.add_parser("predict", help="classify rows with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    csv_flags(p)

    p = sub.add_parser("evaluate", help="k-fold CV; nested grid search when --phi-grid is given")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--head", choices=sorted(HEAD_FLAGS), default="recurrence")
    p.add_argument("--phi-grid", type=_grid)
    p.add_argument("--transfer-grid", default=",".join(KINDS))
    reasoning_flags(p)
    cv_flags(p)
    csv_flags(p)

    p = sub.add_parser("sweep", help="kappa over a phi x iterations grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--head", choices=sorted(HEAD_FLAGS), default="recurrence")
    p.add_argument("--phi-grid", type=_grid, default=evaluation.phi_grid())
    p.add_argument("--iters-grid", type=_int_list)
    reasoning_flags(p, with_phi=False)
    cv_flags(p)
    csv_flags(p)

    p = sub.add_parser("compare", help="recurrence-aware vs last-state head on identical folds")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--phi-grid", type=_grid, default=evaluation.phi_grid())
    reasoning_flags(p, with_phi=False)
    cv_flags(p)
    csv_flags(p)

    p = sub.add_parser("explain", help="feature relevance scores of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--out")

    p = sub.add_parser("dynamics", help="per-iteration state change for a batch")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    csv_flags(p)

    p = sub.add_parser("make-data", help="write a seeded synthetic table")
    p.add_argument("--kind", choices=sorted(synthetic.GENERATORS), required=True)
    p.add_argument("--n", type=_positive_int("--n"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _config(args, phi=None) -> ReasoningConfig:
    return ReasoningConfig(phi=args.phi if phi is None else phi, max_iterations=args.iters,
                           tol=args.tol, cycle_window=args.cycle_window,
                           tf=TransferFunction(args.transfer, args.epsilon))


def _load(args) -> RawTable:
    return load_csv(args.data, delimiter=args.delimiter, header=args.header)


def _dataset_id(args) -> str:
    return Path(args.data).stem


def _write_csv(path, header, rows):
    text = io.StringIO()
    writer = csv.writer(text, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if path is None:
        sys.stdout.write(text.getvalue())
    else:
        Path(path).write_text(text.getvalue(), encoding="utf-8")


def _write_manifest(args, outputs):
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "tool": "ltcn",
        "version": __version__,
        "subcommand": args.command,
        "flags": flags,
        "seed": flags.get("seed"),
        "inputs": [flags[k] for k in ("data", "model") if flags.get(k)],
        "outputs": [str(o) for o in outputs],
    }
    target = Path(f"{outputs[0]}.manifest.json")
    target.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_report(args, header, rows):
    _write_csv(args.out, header, rows)
    records = [dict(zip(header, row)) for row in rows]
    json_path = f"{args.out}.json"
    Path(json_path).write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")
    return [args.out, json_path]


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else value


def cmd_train(args):
    raw = _load(args)
    config = _config(args)
    data = build_dataset(raw, config.tf)
    start = time.perf_counter()
    fitted = ltcn_model.fit(data, config, HEAD_FLAGS[args.head])
    elapsed = time.perf_counter() - start
    fitted.save(args.out)
    _write_manifest(args, [args.out])
    print(f"trained on {raw.n_rows} rows x {raw.n_features} features, {len(data.classes)} classes; "
          f"fit {elapsed:.3f}s, iterations {fitted.iterations}, attractor {fitted.attractor}")


def cmd_predict(args):
    fitted = ltcn_model.load(args.model)
    m = len(fitted.feature_names)
    features = read_feature_rows(args.data, m, delimiter=args.delimiter, header=args.header)
    X = fitted.scaler.transform(features) if len(features) else np.empty((0, m))
    scores = fitted.predict_scores(X)
    labels = fitted.predict_class(X)
    header = ["row", "predicted"] + [f"score_{c}" for c in fitted.classes]
    rows = [[i, labels[i], *map(repr, scores[i].tolist())] for i in range(len(labels))]
    _write_csv(args.out, header, rows)
    if args.out:
        _write_manifest(args, [args.out])


FOLD_HEADER = ["dataset", "head", "fold", "phi", "transfer", "T", "T_effective",
               "kappa", "accuracy", "attractor", "t_alpha"]


def _fold_rows(report, dataset_id):
    return [[_fmt(rec[h]) for h in FOLD_HEADER] for rec in report.records(dataset_id)]


def _timing_rows(report, dataset_id, extra=()):
    return [[dataset_id, report.head, *extra, f.fold, f.phi, f.transfer, repr(f.fit_seconds)]
            for f in report.folds]


def cmd_evaluate(args):
    raw = _load(args)
    head = HEAD_FLAGS[args.head]
    ds_id = _dataset_id(args)
    if args.phi_grid is None:
        report = evaluation.cross_validate(raw, _config(args), head, args.folds, args.seed,
                                           jobs=args.jobs)
        header, rows = FOLD_HEADER, _fold_rows(report, ds_id)
        timings = _timing_rows(report, ds_id)
        log.info("mean kappa %.4f (std %.4f)", report.mean_kappa, report.std_kappa)
        summary = f"mean kappa {report.mean_kappa:.4f} +/- {report.std_kappa:.4f}"
    else:
        kinds = [k.strip() for k in args.transfer_grid.split(",") if k.strip()]
        bad = [k for k in kinds if k not in KINDS]
        if bad:
            raise CliError(f"--transfer-grid: unknown transfer function(s) {bad}")
        result = evaluation.grid_search(raw, args.phi_grid, kinds, _config(args), args.folds,
                                        args.seed, head, jobs=args.jobs)
        report = result.nested
        header, rows = FOLD_HEADER, _fold_rows(report, ds_id)
        timings = _timing_rows(report, ds_id)
        summary = (f"nested mean kappa {report.mean_kappa:.4f}; best cell phi={result.best.phi} "
                   f"transfer={result.best.tf.kind}")
    outputs = _write_report(args, header, rows)
    timing_path = f"{args.out}.timings.csv"
    _write_csv(timing_path, ["dataset", "head", "fold", "phi", "transfer", "fit_seconds"], timings)
    _write_manifest(args, outputs + [timing_path])
    print(summary)


CELL_HEADER = ["dataset", "head", "phi", "transfer", "T", "T_effective", "kappa", "kappa_std",
               "accuracy", "attractor", "t_alpha", "fixed_point_fraction"]


def _cell_row(report, ds_id):
    kinds = Counter(f.attractor for f in report.folds)
    t_alphas = [f.t_alpha for f in report.folds if f.t_alpha is not None]
    return [ds_id, report.head, repr(report.config.phi), report.config.tf.kind,
            report.config.max_iterations, max(f.iterations for f in report.folds),
            repr(report.mean_kappa), repr(report.std_kappa), repr(report.mean_accuracy),
            kinds.most_common(1)[0][0], max(t_alphas) if t_alphas else "",
            repr(report.fixed_point_fraction)]


def cmd_sweep(args):
    raw = _load(args)
    head = HEAD_FLAGS[args.head]
    ds_id = _dataset_id(args)
    iters = args.iters_grid or list(range(1, args.iters + 1))
    plan = make_folds(raw.labels, args.folds, args.seed)
    cells = [(phi, T) for phi in args.phi_grid for T in iters]

    def one(cell):
        phi, T = cell
        cfg = ReasoningConfig(phi, T, args.tol, args.cycle_window,
                              TransferFunction(args.transfer, args.epsilon))
        return evaluation.cross_validate(raw, cfg, head, plan=plan)

    reports = evaluation.parallel_map(one, cells, args.jobs)
    outputs = _write_report(args, CELL_HEADER, [_cell_row(r, ds_id) for r in reports])
    timing_path = f"{args.out}.timings.csv"
    _write_csv(timing_path, ["dataset", "head", "T", "fold", "phi", "transfer", "fit_seconds"],
               [row for r in reports for row in _timing_rows(r, ds_id, (r.config.max_iterations,))])
    _write_manifest(args, outputs + [timing_path])
    best = evaluation.select_best(reports)
    print(f"{len(reports)} cells; best phi={best.config.phi} T={best.config.max_iterations} "
          f"kappa={best.mean_kappa:.4f}")


def cmd_compare(args):
    raw = _load(args)
    ds_id = _dataset_id(args)
    base = _config(args, phi=args.phi_grid[0])
    pairs = evaluation.compare_decision_heads(raw, base, args.folds, args.seed,
                                              phis=args.phi_grid, jobs=args.jobs)
    rows = []
    for pair in pairs:
        rows.append(_cell_row(pair.recurrence, ds_id))
        rows.append(_cell_row(pair.last_state, ds_id))
    outputs = _write_report(args, CELL_HEADER, rows)
    _write_manifest(args, outputs)
    for pair in pairs:
        print(f"phi={pair.phi}: recurrence kappa {pair.recurrence.mean_kappa:.4f}, "
              f"laststate kappa {pair.last_state.mean_kappa:.4f}")


def cmd_explain(args):
    fitted = ltcn_model.load(args.model)
    report = fitted.relevance()
    order = np.argsort(-report.total, kind="stable")
    rows = [[report.features[i], repr(float(report.total[i])), repr(float(report.inner[i])),
             repr(float(report.outer[i]))] for i in order]
    _write_csv(args.out, ["feature", "score", "inner", "outer"], rows)
    if args.out:
        _write_manifest(args, [args.out])


def cmd_dynamics(args):
    fitted = ltcn_model.load(args.model)
    m = len(fitted.feature_names)
    features = read_feature_rows(args.data, m, delimiter=args.delimiter, header=args.header)
    if not len(features):
        raise CliError("dynamics needs at least one data row")
    X = fitted.scaler.transform(features)
    history = dynamics.run(X, fitted.inner.W, fitted.inner.B, fitted.config)
    att = str(history.attractor)
    rows = [[t, repr(d), att] for t, d in enumerate(history.deltas(), start=1)]
    _write_csv(args.out, ["iteration", "delta", "attractor"], rows)
    if args.out:
        weights_path = f"{args.out}.weights.csv"
        blocks = fitted.outer.blocks(m)
        _write_csv(weights_path, ["block", "mean", "std", "mean_abs"],
                   [[t, repr(float(b.mean())), repr(float(b.std())), repr(float(np.abs(b).mean()))]
                    for t, b in enumerate(blocks)])
        _write_manifest(args, [args.out, weights_path])


def cmd_make_data(args):
    gen = synthetic.GENERATORS[args.kind]
    kwargs = {"seed": args.seed}
    if args.n:
        kwargs["n"] = args.n
    raw = gen(**kwargs)
    rows = [[*map(repr, raw.features[i].tolist()), raw.labels[i]] for i in range(raw.n_rows)]
    _write_csv(args.out, [*raw.feature_names, raw.label_name], rows)
    _write_manifest(args, [args.out])


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "explain": cmd_explain,
    "dynamics": cmd_dynamics,
    "make-data": cmd_make_data,
}


def _setup_logging():
    level = os.environ.get("LTCN_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (CliError, DatasetError, ltcn_model.ModelFormatError, ltcn_model.UnsupportedOperation,
            dynamics.DivergenceError, ValueError, ArithmeticError, OSError) as exc:
        err = {"error": type(exc).__name__, "command": args.command, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

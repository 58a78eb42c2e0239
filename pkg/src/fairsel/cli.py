"""Command-line frontend.

Subcommands: train, evaluate, compare, tune, gradcheck. Every command
is deterministic given its full flag set (wall-clock report fields
aside). Repetition seeds derive from the master seed through a fixed
counter scheme, so adding repetitions never reshuffles earlier ones.

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical
failure. The FAIRSEL_THREADS environment variable caps how many
repetitions run in parallel (default 1, sequential).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import functools
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import report as rpt
from .baseline import train_logistic
from .checkpoint import (KIND_ADVERSARIAL, KIND_LOGISTIC, load_model,
                         save_model)
from .data import DatasetSpec, load_csv, prepare_splits
from .diagnostics import run_all
from .errors import DataError, FairselError, NumericalError
from .metrics import GroupedOutcomes, balanced_accuracy
from .training import INFERENCE_POLICIES, TrainConfig, predict, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DEFAULT_GRID = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; we reserve 2 for data
    # errors, so route usage problems through our own exception
    def error(self, message):
        raise UsageError(message)


def derive_seed(master_seed, rep_index):
    """Stable per-repetition seed from the master seed."""
    return int(np.random.SeedSequence(
        entropy=master_seed, spawn_key=(rep_index,)).generate_state(1)[0])


def _worker_count():
    raw = os.environ.get("FAIRSEL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_reps(fn, n_reps):
    workers = min(_worker_count(), n_reps)
    if workers <= 1:
        return [fn(r) for r in range(n_reps)]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_reps)))


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV file with header row")
    p.add_argument("--spec", required=True, help="dataset spec JSON")


def _add_train_flags(p):
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--reps", type=int, default=5,
                   help="independent repetitions with distinct splits")
    p.add_argument("--lambda", dest="sensitivity_weight", type=float, default=1.0,
                   help="weight of the sensitivity term in the predictor loss")
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--inference-policy", choices=INFERENCE_POLICIES,
                   default="threshold05")
    p.add_argument("--mc-samples", type=int, default=32,
                   help="draws per input for the mc-average policy")
    p.add_argument("--alpha-theta", type=float, default=1e-4,
                   help="selector learning rate")
    p.add_argument("--alpha-phi", type=float, default=1e-4,
                   help="predictor learning rate")
    p.add_argument("--hidden", default="200,200,200,200",
                   help="comma-separated hidden layer sizes")
    p.add_argument("--no-mask", action="store_true",
                   help="ablation: let the selector sample the sensitive feature")
    p.add_argument("--score-baseline", action="store_true",
                   help="variance-reduction baseline for the selector updates")


def _add_out_flags(p, default_out):
    p.add_argument("--out", default=default_out,
                   help="output directory for checkpoints and the report")
    p.add_argument("--report-format", choices=("json", "csv"), default="json")


def build_parser():
    parser = _Parser(prog="fairsel",
                     description="Fairness-aware classification through "
                                 "adversarial feature selection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the adversarial model")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_out_flags(p, "fairsel-train")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--spec", default=None,
                   help="optional spec JSON, checked against the checkpoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.add_argument("--report-format", choices=("json", "csv"), default="json")

    p = sub.add_parser("compare",
                       help="train adversarial model and logistic baseline "
                            "on identical splits")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--baseline-epochs", type=int, default=500)
    p.add_argument("--baseline-lr", type=float, default=0.1)
    p.add_argument("--baseline-l2", type=float, default=0.0,
                   help="optional L2 weight for the logistic baseline")
    _add_out_flags(p, "fairsel-compare")

    p = sub.add_parser("tune", help="grid search over the sensitivity weight")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--grid", default=DEFAULT_GRID,
                   help="comma-separated sensitivity weights")
    _add_out_flags(p, "fairsel-tune")
    p.set_defaults(reps=1)

    p = sub.add_parser("gradcheck", help="run gradient and estimator checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=50,
                   help="random instances per gradient check")
    p.add_argument("--dims", type=int, default=None,
                   help="also run the enumeration unbiasedness check at this "
                        "feature count (<= 8)")
    p.add_argument("--samples", type=int, default=200_000,
                   help="draws for the unbiasedness check")
    p.add_argument("--inject-fault", choices=("sen-grad-sign",), default=None,
                   help="deliberately corrupt a gradient (checker self-test)")
    return parser


def _parse_hidden(text):
    try:
        sizes = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"--hidden expects comma-separated integers, got {text!r}")
    if not sizes:
        raise UsageError("--hidden must name at least one layer")
    return sizes


def _config_from_args(args, seed):
    try:
        return TrainConfig(
            alpha_theta=args.alpha_theta,
            alpha_phi=args.alpha_phi,
            batch_size=args.batch_size,
            max_epochs=args.max_epochs,
            patience=args.patience,
            sensitivity_weight=args.sensitivity_weight,
            seed=seed,
            inference_policy=args.inference_policy,
            mc_samples=args.mc_samples,
            hidden_sizes=_parse_hidden(args.hidden),
            mask_sensitive=not args.no_mask,
            score_baseline=args.score_baseline,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _echo_config(args, skip=("command",)):
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _train_one_rep(rep, args, raw, spec, with_baseline=False):
    seed = derive_seed(args.seed, rep)
    train_ds, val_ds, test_ds = prepare_splits(raw, spec, seed)
    config = _config_from_args(args, seed)

    t0 = time.perf_counter()
    model = train(train_ds, val_ds, config)
    adv_metrics = rpt.evaluate_model(KIND_ADVERSARIAL, model, test_ds,
                                     sensitivity_seed=seed)
    entry = {
        "index": rep,
        "seed": seed,
        "metrics": adv_metrics,
        "selection_probabilities": {
            name: float(p) for name, p in
            zip(test_ds.column_names, model.selection_probabilities)},
        "best_epoch": model.best_epoch,
        "epochs_run": len(model.training_log),
        "diagnostics": model.diagnostics,
    }
    baseline_model = None
    if with_baseline:
        baseline_model = train_logistic(train_ds, val_ds,
                                        epochs=args.baseline_epochs,
                                        lr=args.baseline_lr,
                                        l2=getattr(args, "baseline_l2", 0.0))
        entry["baseline_metrics"] = rpt.evaluate_model(
            KIND_LOGISTIC, baseline_model, test_ds, sensitivity_seed=seed)
    entry["wall_clock_seconds"] = time.perf_counter() - t0
    return entry, model, baseline_model, train_ds.encoder


def _print_aggregate(tag, agg, stream=sys.stdout):
    parts = []
    for name in rpt.METRIC_NAMES:
        stats = agg[name]
        if stats["mean"] is None:
            continue
        parts.append(f"{name}={stats['mean']:.4f}+-{stats['std']:.4f}")
    print(f"{tag}: " + " ".join(parts), file=stream)


def cmd_train(args):
    spec = DatasetSpec.from_json(args.spec)
    raw = load_csv(args.data, spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    results = _map_reps(
        functools.partial(_train_one_rep, args=args, raw=raw, spec=spec), args.reps)

    reps = []
    for entry, model, _, encoder in results:
        path = out_dir / f"checkpoint_rep{entry['index']}.json"
        save_model(path, model, encoder)
        # report stays byte-identical across runs: name only, the file
        # lives next to the report
        entry["checkpoint"] = path.name
        reps.append(entry)

    report = rpt.base_report("train", _echo_config(args), args.seed)
    report["repetitions"] = reps
    report["aggregate"] = rpt.aggregate([r["metrics"] for r in reps])
    report["wall_clock_seconds"] = time.perf_counter() - t0

    ext = "json" if args.report_format == "json" else "csv"
    report_path = out_dir / f"report.{ext}"
    rpt.write_report(report, report_path, args.report_format)
    _print_aggregate("adversarial", report["aggregate"])
    print(f"report written to {report_path}")
    return EXIT_OK


def cmd_compare(args):
    spec = DatasetSpec.from_json(args.spec)
    raw = load_csv(args.data, spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    results = _map_reps(
        functools.partial(_train_one_rep, args=args, raw=raw, spec=spec,
                          with_baseline=True), args.reps)

    reps = []
    for entry, model, baseline_model, encoder in results:
        idx = entry["index"]
        adv_path = out_dir / f"adversarial_rep{idx}.json"
        base_path = out_dir / f"baseline_rep{idx}.json"
        save_model(adv_path, model, encoder)
        save_model(base_path, baseline_model, encoder)
        reps.append({
            "index": idx,
            "seed": entry["seed"],
            "adversarial": entry["metrics"],
            "baseline": entry["baseline_metrics"],
            "selection_probabilities": entry["selection_probabilities"],
            "best_epoch": entry["best_epoch"],
            "epochs_run": entry["epochs_run"],
            "diagnostics": entry["diagnostics"],
            "checkpoints": {"adversarial": adv_path.name,
                            "baseline": base_path.name},
            "wall_clock_seconds": entry["wall_clock_seconds"],
        })

    report = rpt.base_report("compare", _echo_config(args), args.seed)
    report["repetitions"] = reps
    report["aggregate"] = {
        "adversarial": rpt.aggregate([r["adversarial"] for r in reps]),
        "baseline": rpt.aggregate([r["baseline"] for r in reps]),
    }
    report["wall_clock_seconds"] = time.perf_counter() - t0

    ext = "json" if args.report_format == "json" else "csv"
    report_path = out_dir / f"report.{ext}"
    rpt.write_report(report, report_path, args.report_format)
    _print_aggregate("adversarial", report["aggregate"]["adversarial"])
    _print_aggregate("baseline", report["aggregate"]["baseline"])
    print(f"report written to {report_path}")
    return EXIT_OK


def cmd_evaluate(args):
    kind, model, encoder = load_model(args.checkpoint)
    if args.spec is not None:
        spec = DatasetSpec.from_json(args.spec)
        if spec.to_dict()["columns"] != encoder.spec.to_dict()["columns"]:
            raise DataError("spec columns do not match the checkpoint's encoder")
    raw = load_csv(args.data, encoder.spec)
    dataset = encoder.transform(raw)

    metrics = rpt.evaluate_model(kind, model, dataset,
                                 sensitivity_seed=args.seed)
    report = rpt.base_report("evaluate", _echo_config(args), args.seed)
    report["model_kind"] = kind
    report["n_rows"] = dataset.n
    report["rejected_rows"] = raw.n_rejected
    report["metrics"] = metrics

    if args.out is not None:
        rpt.write_report(report, args.out, args.report_format)
        print(f"report written to {args.out}")
    else:
        rpt.validate_report(report)
        text = (json.dumps(report, indent=2) if args.report_format == "json"
                else rpt.flatten_csv(report))
        print(text)
    return EXIT_OK


def _parse_grid(text):
    try:
        grid = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--grid expects comma-separated numbers, got {text!r}")
    if not grid:
        raise UsageError("--grid must contain at least one value")
    if any(g < 0 for g in grid):
        raise UsageError("grid values must be nonnegative")
    return grid


def _tune_point(rep, args, raw, spec, weight):
    seed = derive_seed(args.seed, rep)
    train_ds, val_ds, test_ds = prepare_splits(raw, spec, seed)
    config = _config_from_args(args, seed)
    config.sensitivity_weight = weight
    model = train(train_ds, val_ds, config)
    y_pred, _ = predict(model, val_ds.features)
    val_score = balanced_accuracy(GroupedOutcomes(
        val_ds.label_indices(), y_pred, val_ds.group_tags))
    test_metrics = rpt.evaluate_model(KIND_ADVERSARIAL, model, test_ds,
                                      sensitivity_seed=seed)
    return val_score, test_metrics


def cmd_tune(args):
    spec = DatasetSpec.from_json(args.spec)
    raw = load_csv(args.data, spec)
    grid = sorted(set(_parse_grid(args.grid)))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    entries = []
    best = None  # (score, weight)
    for weight in grid:
        rows = _map_reps(
            functools.partial(_tune_point, args=args, raw=raw, spec=spec,
                              weight=weight), args.reps)
        val_scores = [r[0] for r in rows]
        mean_val = float(np.mean(val_scores))
        entries.append({
            "sensitivity_weight": weight,
            "validation_balanced_accuracy": mean_val,
            "test": rpt.aggregate([r[1] for r in rows]),
        })
        if best is None or mean_val > best[0]:
            best = (mean_val, weight)

    for e in entries:
        e["selected"] = e["sensitivity_weight"] == best[1]

    report = rpt.base_report("tune", _echo_config(args), args.seed)
    report["grid"] = entries
    report["best"] = {"sensitivity_weight": best[1],
                      "validation_balanced_accuracy": best[0]}
    report["wall_clock_seconds"] = time.perf_counter() - t0

    report_path = out_dir / "report.json"
    rpt.write_report(report, report_path, "json")
    print(f"best sensitivity weight: {best[1]} "
          f"(validation balanced accuracy {best[0]:.4f})")
    print(f"report written to {report_path}")
    return EXIT_OK


def cmd_gradcheck(args):
    if args.dims is not None and args.dims > 8:
        raise UsageError("--dims must be at most 8 (enumeration cost)")
    results = run_all(seed=args.seed, instances=args.instances,
                      dims=args.dims, samples=args.samples,
                      fault=args.inject_fault)
    failed = False
    for res in results:
        print(res.line())
        failed = failed or not res.passed
    if failed:
        print("gradcheck: FAILURES detected", file=sys.stderr)
        return EXIT_NUMERIC
    print("gradcheck: all checks passed")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "tune": cmd_tune,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FairselError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

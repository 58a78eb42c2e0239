"""Run reports: metric evaluation, aggregation and serialization.

Reports are dicts with a fixed field order and a schema version; bump
REPORT_SCHEMA_VERSION whenever a field is added, removed or renamed.
Wall-clock fields (any key starting with "wall_clock") are the only
nondeterministic content, so byte-level reproducibility checks strip
them first.
"""

from __future__ import annotations

import json

import jsonschema
import numpy as np

from . import metrics as M
from .baseline import predict_logistic_batch
from .checkpoint import KIND_ADVERSARIAL, KIND_LOGISTIC
from .errors import DataError
from .training import mean_sensitivity, predict

REPORT_SCHEMA_VERSION = 1

METRIC_NAMES = ("accuracy", "balanced_accuracy", "equal_opportunity_diff",
                "average_odds_diff", "theil_index", "mean_sensitivity")

# sampled selections per row when estimating the expected sensitivity
SENSITIVITY_SAMPLES = 16

_NULLABLE_NUMBER = {"type": ["number", "null"]}

_METRICS_SCHEMA = {
    "type": "object",
    "properties": {name: _NULLABLE_NUMBER for name in METRIC_NAMES},
    "required": list(METRIC_NAMES),
}

_AGGREGATE_SCHEMA = {
    "type": "object",
    "properties": {name: {
        "type": "object",
        "properties": {"mean": _NULLABLE_NUMBER, "std": _NULLABLE_NUMBER},
        "required": ["mean", "std"],
    } for name in METRIC_NAMES},
    "required": list(METRIC_NAMES),
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "command": {"enum": ["train", "evaluate", "compare", "tune"]},
        "config": {"type": "object"},
        "master_seed": {"type": "integer"},
    },
    "required": ["schema_version", "command", "config", "master_seed"],
    "allOf": [
        {
            "if": {"properties": {"command": {"const": "train"}}},
            "then": {
                "required": ["repetitions", "aggregate"],
                "properties": {
                    "repetitions": {"type": "array", "items": {
                        "type": "object",
                        "required": ["index", "seed", "metrics",
                                     "selection_probabilities", "checkpoint"],
                        "properties": {"metrics": _METRICS_SCHEMA},
                    }},
                    "aggregate": _AGGREGATE_SCHEMA,
                },
            },
        },
        {
            "if": {"properties": {"command": {"const": "compare"}}},
            "then": {
                "required": ["repetitions", "aggregate"],
                "properties": {
                    "repetitions": {"type": "array", "items": {
                        "type": "object",
                        "required": ["index", "seed", "adversarial",
                                     "baseline"],
                        "properties": {"adversarial": _METRICS_SCHEMA,
                                       "baseline": _METRICS_SCHEMA},
                    }},
                    "aggregate": {
                        "type": "object",
                        "required": ["adversarial", "baseline"],
                        "properties": {"adversarial": _AGGREGATE_SCHEMA,
                                       "baseline": _AGGREGATE_SCHEMA},
                    },
                },
            },
        },
        {
            "if": {"properties": {"command": {"const": "evaluate"}}},
            "then": {
                "required": ["model_kind", "metrics"],
                "properties": {"metrics": _METRICS_SCHEMA},
            },
        },
        {
            "if": {"properties": {"command": {"const": "tune"}}},
            "then": {
                "required": ["grid", "best"],
                "properties": {"grid": {"type": "array", "items": {
                    "type": "object",
                    "required": ["sensitivity_weight",
                                 "validation_balanced_accuracy", "selected"],
                }}},
            },
        },
    ],
}


def validate_report(report):
    """Check a report against the published schema; raises on violation."""
    jsonschema.validate(report, REPORT_SCHEMA)


def evaluate_model(kind, model, dataset, sensitivity_seed=0):
    """All report metrics for one model on one encoded dataset.

    mean_sensitivity is None for the logistic baseline, which has no
    selection distribution.
    """
    if dataset.n == 0:
        raise DataError("cannot evaluate on an empty dataset")
    if kind == KIND_ADVERSARIAL:
        y_pred, _ = predict(model, dataset.features)
        sens = mean_sensitivity(
            model.net, model.policy, dataset.features,
            n_samples=SENSITIVITY_SAMPLES,
            rng=np.random.default_rng([sensitivity_seed, 2]))
    elif kind == KIND_LOGISTIC:
        y_pred, _ = predict_logistic_batch(model, dataset.features)
        sens = None
    else:
        raise ValueError(f"unknown model kind {kind!r}")

    outcomes = M.GroupedOutcomes(dataset.label_indices(), y_pred,
                                 dataset.group_tags)
    return {
        "accuracy": M.accuracy(outcomes),
        "balanced_accuracy": M.balanced_accuracy(outcomes),
        "equal_opportunity_diff": M.equal_opportunity_diff(outcomes),
        "average_odds_diff": M.average_odds_diff(outcomes),
        "theil_index": M.theil_index(outcomes),
        "mean_sensitivity": sens,
    }


def aggregate(per_rep):
    """Mean and sample standard deviation per metric across repetitions.

    Metrics that are None in any repetition (e.g. mean_sensitivity for
    the baseline) aggregate to None.
    """
    out = {}
    for name in METRIC_NAMES:
        vals = [r[name] for r in per_rep]
        if any(v is None for v in vals):
            out[name] = {"mean": None, "std": None}
            continue
        arr = np.asarray(vals, dtype=np.float64)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        out[name] = {"mean": float(arr.mean()), "std": std}
    return out


def base_report(command, config_echo, master_seed):
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": command,
        "config": config_echo,
        "master_seed": master_seed,
    }


def write_report(report, path, fmt="json"):
    validate_report(report)
    if fmt == "json":
        text = json.dumps(report, indent=2)
    elif fmt == "csv":
        text = flatten_csv(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def _metric_rows(tag, entries, aggregates):
    rows = []
    for i, m in enumerate(entries):
        rows.append([tag, f"rep{i}"] + [_cell(m[name]) for name in METRIC_NAMES])
    for stat in ("mean", "std"):
        rows.append([tag, stat]
                    + [_cell(aggregates[name][stat]) for name in METRIC_NAMES])
    return rows


def _cell(v):
    return "" if v is None else repr(float(v))


def flatten_csv(report):
    """Long-form CSV view of a train/compare/evaluate report."""
    header = ["model", "row", *METRIC_NAMES]
    rows = []
    if report["command"] == "compare":
        for tag in ("adversarial", "baseline"):
            entries = [rep[tag] for rep in report["repetitions"]]
            rows.extend(_metric_rows(tag, entries, report["aggregate"][tag]))
    elif report["command"] == "train":
        entries = [rep["metrics"] for rep in report["repetitions"]]
        rows.extend(_metric_rows("adversarial", entries, report["aggregate"]))
    elif report["command"] == "evaluate":
        rows.append([report["model_kind"], "test"]
                    + [_cell(report["metrics"][name]) for name in METRIC_NAMES])
    else:
        raise ValueError(f"no CSV flattening for command {report['command']!r}")
    lines = [",".join(header)]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    return "\n".join(lines)


def strip_wall_clock(obj):
    """Copy of a report with every wall-clock field removed (reports are
    byte-identical across reruns only after this)."""
    if isinstance(obj, dict):
        return {k: strip_wall_clock(v) for k, v in obj.items()
                if not k.startswith("wall_clock")}
    if isinstance(obj, list):
        return [strip_wall_clock(v) for v in obj]
    return obj

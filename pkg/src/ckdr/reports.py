"""Deterministic report emission: JSON-shaped structured text and flat CSV.

Reports never embed timestamps (run metadata goes to a separate file), use
sorted keys and full-precision float repr, and therefore reproduce byte for
byte under a fixed config and seed.
"""

import dataclasses
import json
import time
from pathlib import Path

import numpy as np


def _plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, float) and (obj != obj or obj in (float("inf"), float("-inf"))):
        return repr(obj)
    return obj


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_csv(header, rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_run_metadata(path, argv):
    """Timestamped run info, kept apart from the reproducible reports."""
    write_json({"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "argv": list(argv)}, path)


def bound_report_rows(report):
    header = [
        "p", "m", "r", "lambda_r", "nu", "delta", "kappa", "gap", "gap_is_plugin",
        "gap_flagged", "term1", "term2", "total", "precondition_ok", "rho",
        "margin_loss", "confidence_term", "generalization_total", "lower_bound_value",
    ]
    row = [getattr(report, name) for name in header]
    return header, [row]


def rademacher_rows(est, params, m):
    header = ["m", "r", "lambda_r", "nu", "delta", "draws", "estimate", "stderr", "method", "lower_estimate", "seed"]
    row = [m, params.r, params.lambda_r, params.nu, params.delta, est.n_draws,
           est.estimate, est.stderr, est.method, est.lower_estimate, est.seed]
    return header, [row]


def concentration_rows(reports, slope):
    header = ["m", "u", "trials", "r", "kappa", "gap", "bound", "mean_diff", "max_diff",
              "satisfaction_rate", "max_kyfan_drift", "drift_bound", "slope"]
    rows = [
        [rep.m, rep.u, rep.trials, rep.r, rep.kappa, rep.gap, rep.bound, rep.mean_diff,
         rep.max_diff, rep.satisfaction_rate, rep.max_kyfan_drift, rep.drift_bound, slope]
        for rep in reports
    ]
    return header, rows


def predictions_rows(scores, labels):
    header = ["index", "score", "label"]
    rows = [[i, s, int(l)] for i, (s, l) in enumerate(zip(scores, labels))]
    return header, rows

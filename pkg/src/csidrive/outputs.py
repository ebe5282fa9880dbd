"""Trace, metrics and resolved-scenario files for one run."""
import csv
import json
from pathlib import Path

import numpy as np

from csidrive.engine import TRACE_COLUMNS
from csidrive.metrics import Metrics
from csidrive.scenario import scenario_to_dict

TRACE_FILE = "trace.csv"
METRICS_FILE = "metrics.json"
SCENARIO_FILE = "scenario.resolved.json"
RUN_FILE = "run.json"


def _fmt(v):
    return f"{v:.9g}"


def _write(path, writer):
    try:
        with open(path, "w", newline="") as fh:
            writer(fh)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def write_trace_csv(trace, path):
    """Write the trace columns in their fixed order with 9 significant digits."""
    cols = [np.asarray(trace[c]) for c in TRACE_COLUMNS]

    def body(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    _write(path, body)


def read_trace_csv(path):
    """
    Read a trace file back into a dict of float arrays.

    Raises
    ------
    ValueError
        If the header differs from the trace schema.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [[float(v) for v in r] for r in reader if r]
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}") from exc
    if header is None or tuple(header) != TRACE_COLUMNS:
        raise ValueError(f"{path}: header does not match the trace schema "
                         f"{','.join(TRACE_COLUMNS)}")
    data = np.array(rows, dtype=float).reshape(len(rows), len(TRACE_COLUMNS))
    return {name: data[:, j].copy() for j, name in enumerate(TRACE_COLUMNS)}


def write_metrics_json(metrics, path):
    _write(path, lambda fh: json.dump(metrics.to_dict(), fh, indent=2))


def read_metrics_json(path):
    with open(path) as fh:
        return Metrics.from_dict(json.load(fh))


def write_outputs(trace, metrics, out_dir, scenario=None):
    """
    Write one run's files into `out_dir` (created if missing).

    Produces ``trace.csv``, ``metrics.json``, ``run.json`` (run flags such
    as stall and fault times) and, when `scenario` is given,
    ``scenario.resolved.json`` with every effective parameter.

    Returns
    -------
    dict
        File role to path.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create {out}: {exc.strerror}") from exc
    paths = {"trace": out / TRACE_FILE, "metrics": out / METRICS_FILE}
    write_trace_csv(trace, paths["trace"])
    write_metrics_json(metrics, paths["metrics"])
    meta = getattr(trace, "meta", None)
    if meta is not None:
        paths["run"] = out / RUN_FILE
        _write(paths["run"], lambda fh: json.dump(meta, fh, indent=2))
    if scenario is not None:
        paths["scenario"] = out / SCENARIO_FILE
        doc = scenario_to_dict(scenario)
        _write(paths["scenario"], lambda fh: json.dump(doc, fh, indent=2))
    return paths

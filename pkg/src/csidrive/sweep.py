"""One-parameter sweeps over a base scenario."""
import csv
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from csidrive.engine import run_scenario
from csidrive.metrics import Metrics
from csidrive.scenario import set_parameter

log = logging.getLogger(__name__)

METRIC_FIELDS = tuple(f.name for f in dataclasses.fields(Metrics))
SWEEP_COLUMNS = ("value",) + METRIC_FIELDS + ("delta_hat_residual_deg", "error")


def residual_delta_hat(trace, tail=0.2):
    """Mean |delta_hat| in degrees over the last `tail` seconds of the trace."""
    t = np.asarray(trace["t"], dtype=float)
    if t.size == 0:
        return None
    sel = t >= t[-1] - tail
    return float(np.mean(np.abs(np.asarray(trace["delta_hat_deg"], dtype=float)[sel])))


def _run_variant(args):
    base, path, value = args
    row = {"value": value, "error": None}
    try:
        sc = set_parameter(base, path, value)
        trace, m = run_scenario(sc)
    except Exception as exc:  # recorded per variant; the sweep goes on
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(m.to_dict())
    row["delta_hat_residual_deg"] = residual_delta_hat(trace)
    return row


def run_sweep(base, path, values, workers=None):
    """
    Run `base` once per value of the dotted parameter `path`.

    Parameters
    ----------
    base : Scenario
    path : str
        Dotted parameter name, e.g. ``"transition.hc_dtheta"``.
    values : sequence
    workers : int, optional
        Process count. ``None`` or 1 runs serially in this process.

    Returns
    -------
    list of dict
        One row per value in input order, keyed by :data:`SWEEP_COLUMNS`.
        A failed variant has its ``error`` set and empty metrics.
    """
    jobs = [(base, path, v) for v in values]
    if workers is None or workers <= 1 or len(jobs) <= 1:
        rows = [_run_variant(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_variant, jobs))
    for r in rows:
        if r["error"]:
            log.warning("%s=%r failed: %s", path, r["value"], r["error"])
    return [{c: r.get(c) for c in SWEEP_COLUMNS} for r in rows]


def write_sweep_csv(rows, path):
    """Write sweep rows; ``None`` becomes an empty cell."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path

"""Transition-quality metrics computed from a trace."""
from dataclasses import asdict, dataclass

import numpy as np

from csidrive.controller import Terminal, wrap
from csidrive.scenario import MetricsConfig


@dataclass(frozen=True)
class Metrics:
    """
    Transition-quality numbers.

    Times are measured from the T2_EST to T3_SENSORLESS switch; ``None``
    marks an event that was not reached within the trace.
    """
    t_T2: float = None
    t_T3: float = None
    speed_osc_pp_T3: float = None
    current_osc_pp_T3: float = None
    dq_convergence_time: float = None
    delta_hat_settle_time: float = None
    t2_speed_jump: float = None
    t2_angle_jump: float = None
    stall_detected: bool = False
    fault: str = None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def first_entry(trace, terminal):
    """Index of the first record in `terminal`, or ``None``."""
    idx = np.flatnonzero(trace["terminal"] == int(terminal))
    return int(idx[0]) if idx.size else None


def settle_time(t, ok):
    """
    First time from which `ok` holds for every remaining sample.

    Returns ``None`` if the last sample does not satisfy `ok`.
    """
    if len(ok) == 0 or not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return float(t[0]) if bad.size == 0 else float(t[bad[-1] + 1])


def _pp(x):
    return float(np.max(x) - np.min(x)) if len(x) else None


def compute_metrics(trace, cfg=None):
    """
    Derive :class:`Metrics` from a trace (in memory or re-read from CSV).

    Parameters
    ----------
    trace : Trace or mapping of column name to array
    cfg : MetricsConfig, optional

    """
    cfg = cfg or MetricsConfig()
    t = np.asarray(trace["t"], dtype=float)
    term = np.asarray(trace["terminal"])
    out = {}

    t1 = term == int(Terminal.T1_IF)
    out["stall_detected"] = bool(np.any(np.asarray(trace["delta_star_deg"])[t1] <= 0.0))
    if np.any(term == int(Terminal.FAULT)):
        k = int(np.flatnonzero(term == int(Terminal.FAULT))[0])
        out["fault"] = f"estimator lock lost at t={t[k]:.4f} s"

    k2 = first_entry(trace, Terminal.T2_EST)
    if k2 is not None:
        out["t_T2"] = float(t[k2])
        w = np.asarray(trace["omega_m_rpm"], dtype=float)
        sel = (t >= t[k2]) & (t <= t[k2] + cfg.t2_window + 1e-12)
        out["t2_speed_jump"] = float(np.max(np.abs(w[sel] - w[k2])))
        th = np.asarray(trace["theta_used"], dtype=float)
        if k2 > 0:
            # angle step beyond the frame's normal advance over one period
            expected = th[k2 - 1] - th[k2 - 2] if k2 > 1 else 0.0
            out["t2_angle_jump"] = abs(wrap(float(th[k2] - th[k2 - 1] - expected)))

    k3 = first_entry(trace, Terminal.T3_SENSORLESS)
    if k3 is not None:
        t3 = float(t[k3])
        out["t_T3"] = t3
        after = t >= t3
        win = after & (t <= t3 + cfg.t3_window + 1e-12)
        out["speed_osc_pp_T3"] = _pp(np.asarray(trace["omega_m_rpm"], dtype=float)[win])
        out["current_osc_pp_T3"] = _pp(np.asarray(trace["i_q_true"], dtype=float)[win])
        gap = np.maximum(
            np.abs(np.asarray(trace["i_d_true"], dtype=float)
                   - np.asarray(trace["i_d_hat"], dtype=float)),
            np.abs(np.asarray(trace["i_q_true"], dtype=float)
                   - np.asarray(trace["i_q_hat"], dtype=float)))
        ts = settle_time(t[after], gap[after] < cfg.dq_threshold)
        out["dq_convergence_time"] = None if ts is None else ts - t3
        dh = np.abs(np.asarray(trace["delta_hat_deg"], dtype=float))
        ts = settle_time(t[after], dh[after] < cfg.settle_band_deg)
        out["delta_hat_settle_time"] = None if ts is None else ts - t3
    return Metrics(**out)

import math

import numpy as np
import pytest

from csidrive.controller import Terminal
from csidrive.engine import TRACE_COLUMNS
from csidrive.metrics import Metrics, compute_metrics, settle_time
from csidrive.scenario import MetricsConfig

DT = 2e-4


def synthetic(t_end=3.0, t3=1.0, t2=0.5):
    t = np.round(np.arange(int(round(t_end / DT)) + 1) * DT, 10)
    tr = {c: np.zeros_like(t) for c in TRACE_COLUMNS}
    tr["t"] = t
    term = np.full(t.size, int(Terminal.T1_IF))
    term[t >= t2] = int(Terminal.T2_EST)
    term[t >= t3] = int(Terminal.T3_SENSORLESS)
    tr["terminal"] = term.astype(float)
    tr["delta_star_deg"][:] = 30.0
    tr["omega_m_rpm"][:] = 300.0
    tr["theta_used"] = 2 * math.pi * 30 * t
    return tr


def test_speed_pp_is_twice_amplitude():
    tr = synthetic()
    A, f = 4.0, 5.0
    tr["omega_m_rpm"] = 300.0 + A * np.sin(2 * math.pi * f * tr["t"])
    m = compute_metrics(tr)
    assert m.speed_osc_pp_T3 == pytest.approx(2 * A, rel=1e-9)


def test_current_pp_uses_true_q_current():
    tr = synthetic()
    tr["i_q_true"] = 1.0 + 0.05 * np.cos(2 * math.pi * 7.0 * tr["t"])
    tr["i_q_hat"] = tr["i_q_true"]
    m = compute_metrics(tr)
    assert m.current_osc_pp_T3 == pytest.approx(0.1, rel=1e-6)


def test_dq_convergence_of_exponential_gap():
    tr = synthetic()
    tau = 0.13
    after = tr["t"] >= 1.0
    tr["i_q_hat"][after] = np.exp(-(tr["t"][after] - 1.0) / tau)
    m = compute_metrics(tr, MetricsConfig(dq_threshold=0.1))
    assert m.dq_convergence_time == pytest.approx(tau * math.log(10), abs=DT)


def test_delta_hat_settle_time():
    tr = synthetic()
    after = tr["t"] >= 1.0
    tr["delta_hat_deg"][after] = 10.0 * np.exp(-(tr["t"][after] - 1.0) / 0.2)
    m = compute_metrics(tr, MetricsConfig(settle_band_deg=2.0))
    assert m.delta_hat_settle_time == pytest.approx(0.2 * math.log(5), abs=DT)


def test_t2_jumps():
    tr = synthetic()
    tr["omega_m_rpm"][tr["t"] >= 0.52] = 301.5
    tr["theta_used"][tr["t"] >= 0.5] += 0.004
    m = compute_metrics(tr)
    assert m.t_T2 == pytest.approx(0.5)
    assert m.t2_speed_jump == pytest.approx(1.5)
    assert m.t2_angle_jump == pytest.approx(0.004, abs=1e-9)


def test_absent_events_are_not_achieved():
    tr = synthetic(t3=10.0, t2=10.0)
    m = compute_metrics(tr)
    assert m.t_T2 is None and m.t_T3 is None
    assert m.speed_osc_pp_T3 is None and m.dq_convergence_time is None
    assert not m.stall_detected and m.fault is None


def test_never_settling_is_not_achieved():
    tr = synthetic()
    tr["delta_hat_deg"][-1] = 5.0
    assert compute_metrics(tr).delta_hat_settle_time is None


def test_stall_and_fault_flags():
    tr = synthetic()
    tr["delta_star_deg"][100] = -0.1
    tr["terminal"][-50:] = int(Terminal.FAULT)
    m = compute_metrics(tr)
    assert m.stall_detected
    assert "lock lost" in m.fault


def test_settle_time_helper():
    t = np.arange(5.0)
    assert settle_time(t, np.array([False, True, False, True, True])) == 3.0
    assert settle_time(t, np.ones(5, bool)) == 0.0
    assert settle_time(t, np.array([True] * 4 + [False])) is None


def test_metrics_dict_roundtrip():
    m = Metrics(t_T2=3.0, speed_osc_pp_T3=1.5, stall_detected=True)
    assert Metrics.from_dict(m.to_dict()) == m


def test_default_metrics_bounds(default_run):
    m = default_run[1]
    for v in (m.speed_osc_pp_T3, m.current_osc_pp_T3, m.t2_speed_jump):
        assert v is not None and v >= 0
    for v in (m.t_T2, m.t_T3):
        assert 0.0 <= v <= 5.0

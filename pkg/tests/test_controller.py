import math
from dataclasses import replace

import numpy as np
import pytest

from csidrive.controller import (ControllerState, IfStartupParams, PiGains, Terminal,
                                 TransitionConfig, align_compensator_step,
                                 current_loop_step, hillclimb_step, if_reference,
                                 inverse_park, park, pi_step, select_transform_angle,
                                 speed_loop_step, transition_supervisor, wrap)
from csidrive.errors import ParameterError
from csidrive.estimator import LockReport
from csidrive.scenario import Scenario

DT = 2e-4
LOCKED = LockReport(True, 40.0, 0.0)
UNLOCKED = LockReport(False, 0.0, 1.0)


# --- transforms -------------------------------------------------------------

def test_park_identity_at_zero():
    assert park((1.3, -0.2), 0.0) == (1.3, -0.2)
    assert inverse_park((1.3, -0.2), 0.0) == (1.3, -0.2)


def test_park_roundtrip():
    rng = np.random.default_rng(5)
    for x, th in zip(rng.normal(0, 10, (200, 2)), rng.uniform(-40, 40, 200)):
        back = inverse_park(park(tuple(x), th), th)
        assert np.allclose(back, x, rtol=0, atol=1e-12 * max(1.0, np.abs(x).max()))


def test_frame_shift_relation():
    # currents set in the virtual frame, seen from a frame leading it by delta
    rng = np.random.default_rng(6)
    for i_d_s, i_q_s, delta, th in rng.uniform(-3, 3, (200, 4)):
        i_ab = inverse_park((i_d_s, i_q_s), th)
        i_d, i_q = park(i_ab, th + delta)
        assert i_q == pytest.approx(i_q_s * math.cos(delta) - i_d_s * math.sin(delta), abs=1e-12)
        assert i_d == pytest.approx(i_q_s * math.sin(delta) + i_d_s * math.cos(delta), abs=1e-12)


def test_wrap_range():
    for a in (-7.0, -math.pi, 0.0, math.pi, 3 * math.pi, 100.0):
        w = wrap(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)


# --- I-f reference ----------------------------------------------------------

def test_if_reference_start_and_saturation():
    p = IfStartupParams()
    th, w, iref = if_reference(0.0, p, 0.0, DT)
    assert w == 0.0 and th == 0.0 and iref == (0.0, p.i_q_star)
    t_sat = p.omega_target / p.K_omega
    assert if_reference(t_sat, p, 0.0, DT)[1] == pytest.approx(p.omega_target)
    assert if_reference(t_sat + 1.0, p, 0.0, DT)[1] == p.omega_target


def test_default_ramp_reaches_target_before_align():
    p = IfStartupParams()
    assert p.omega_target == pytest.approx(2 * math.pi * 30)
    assert p.omega_target / p.K_omega < TransitionConfig().t_align


# --- PI and regulators ------------------------------------------------------

def test_pi_anti_windup_freezes_integrator():
    g = PiGains(1.0, 100.0, -1.0, 1.0)
    u, integ = pi_step(10.0, 0.5, g, DT)
    assert u == 1.0 and integ == 0.5
    u, integ = pi_step(-0.1, 0.5, g, DT)
    assert integ == pytest.approx(0.5 - 100.0 * 0.1 * DT)


def test_current_loop_zero_error_zero_speed():
    sc = Scenario()
    st = replace(ControllerState(), integ_d=0.3, integ_q=-0.2)
    u, st2 = current_loop_step((1.0, 2.0), (1.0, 2.0), 0.0, st, sc.current_pi, sc.line_model, DT)
    assert u == (0.3, -0.2)
    u, _ = current_loop_step((0.0, 0.0), (0.0, 0.0), 0.0, ControllerState(), sc.current_pi,
                             sc.line_model, DT)
    assert u == (0.0, 0.0)


def test_current_loop_emf_feedforward():
    sc = Scenario()
    m = sc.line_model
    w = 2 * math.pi * 30
    i = (0.2, 1.5)
    u, _ = current_loop_step(i, i, w, ControllerState(), sc.current_pi, m, DT)
    assert u[1] == pytest.approx(w * m.L_s * i[0] + w * m.k_e / m.pole_pairs)
    assert u[0] == pytest.approx(-w * m.L_s * i[1])


def test_current_loop_step_response():
    # oracle: exact zero-order-hold discretisation of the series RL branch
    sc = Scenario()
    m = sc.line_model
    a = math.exp(-m.R_s * DT / m.L_s)
    b = (1 - a) / m.R_s
    st = ControllerState()
    i = [0.0, 0.0]
    t90 = None
    for k in range(100):
        u, st = current_loop_step((0.0, 1.0), tuple(i), 0.0, st, sc.current_pi, m, DT)
        i = [a * i[0] + b * u[0], a * i[1] + b * u[1]]
        if t90 is None and i[1] >= 0.9:
            t90 = (k + 1) * DT
    assert t90 is not None and t90 <= 5e-3
    assert i[1] == pytest.approx(1.0, abs=1e-3)


def test_speed_loop_bumpless_and_saturation():
    sc = Scenario()
    g = sc.speed_pi
    i_q_star = sc.startup.i_q_star
    st = replace(ControllerState(), integ_speed=i_q_star)
    iq, _ = speed_loop_step(31.4, 31.4, st, g, DT)
    assert iq == i_q_star
    # with a speed error the re-seeded integrator still hands over exactly
    iq, _ = speed_loop_step(31.4, 30.0, st, g, DT, bumpless=True)
    assert iq == pytest.approx(i_q_star, abs=1e-12)
    iq, _ = speed_loop_step(1e6, 0.0, ControllerState(), g, DT)
    assert iq == g.output_max


def test_speed_loop_rejects_constant_disturbance():
    sc = Scenario()
    mp, g = sc.motor, sc.speed_pi
    ref, w, Td = 31.4, 0.0, 1.0
    st = ControllerState()
    for _ in range(int(2.0 / DT)):
        iq, st = speed_loop_step(ref, w, st, g, DT)
        w += DT * (mp.k_e * iq - Td) / mp.J
    assert abs(ref - w) < 1e-6
    assert iq == pytest.approx(Td / mp.k_e, rel=1e-6)


# --- alignment --------------------------------------------------------------

def test_align_target_zero_when_aligned():
    st = align_compensator_step(1.2, 1.2, ControllerState(), TransitionConfig(), DT)
    assert st.align_target == 0.0 and st.align_offset == 0.0


def test_align_ramp_arithmetic():
    cfg = TransitionConfig(align_ramp_rate=2.0, align_dwell=0.0)
    st = ControllerState()
    t = 0.0
    while not st.align_complete:
        st = align_compensator_step(0.0, 0.4, st, cfg, DT)
        t += DT
        assert t < 1.0
    assert t == pytest.approx((0.4 - cfg.align_tol) / 2.0, abs=2 * DT)
    assert abs(st.align_offset - 0.4) < cfg.align_tol


# --- hill climb -------------------------------------------------------------

def climb(delta0, dtheta, h=1, stop_band=None, max_decisions=5000, theta0=0.0):
    cfg = TransitionConfig(hc_dtheta=dtheta, hc_h=h,
                           hc_stop_band=stop_band or TransitionConfig().hc_stop_band)
    st = replace(ControllerState(), theta_c=theta0)
    path = []
    while not st.hc_converged and st.hc_decisions < max_decisions:
        st = hillclimb_step(math.cos(delta0 - st.theta_c), st, cfg)
        path.append(st.theta_c)
    return st, path


def grid_optimum(delta0, dtheta, theta0=0.0, span=2.0):
    # exhaustive search over the lattice the climb can visit
    k = np.arange(-int(span / dtheta), int(span / dtheta) + 1)
    grid = theta0 + k * dtheta
    return grid[np.argmax(np.cos(delta0 - grid))]


def test_hillclimb_reference_case():
    st, path = climb(0.3, 0.01)
    first = next(i for i, th in enumerate(path) if abs(0.3 - th) <= 0.02)
    assert first + 1 <= 40
    assert st.hc_converged and st.hc_decisions <= 40
    assert abs(0.3 - st.theta_c) <= 0.02
    assert abs(st.theta_c - grid_optimum(0.3, 0.01)) <= 0.01


def test_hillclimb_at_optimum_stops_in_band():
    st, path = climb(0.0, 0.01)
    assert st.hc_converged
    assert max(abs(p) for p in path) <= 0.02
    assert abs(st.theta_c) <= 0.02


def test_hillclimb_monotone_objective_never_flips():
    cfg = TransitionConfig(hc_h=1)
    st = ControllerState()
    for k in range(200):
        st = hillclimb_step(float(k), st, cfg)
        assert st.hc_sign == 1 and st.hc_flips == 0
    assert st.theta_c == pytest.approx(200 * cfg.hc_dtheta)


def test_hillclimb_window_averaging():
    cfg = TransitionConfig(hc_h=10)
    st = ControllerState()
    for _ in range(9):
        st = hillclimb_step(1.0, st, cfg)
    assert st.hc_decisions == 0 and st.theta_c == 0.0
    st = hillclimb_step(1.0, st, cfg)
    assert st.hc_decisions == 1 and st.theta_c == cfg.hc_dtheta


@pytest.mark.parametrize("dtheta", [0.002, 0.005, 0.01])
def test_hillclimb_matches_grid_search(dtheta):
    rng = np.random.default_rng(7)
    for delta0 in rng.uniform(-1, 1, 50):
        st, _ = climb(delta0, dtheta)
        assert st.hc_converged
        assert abs(delta0 - st.theta_c) <= 2 * dtheta
        assert abs(st.theta_c - grid_optimum(delta0, dtheta)) <= dtheta


# --- supervisor -------------------------------------------------------------

def _drive_supervisor(cfg, lock_fn, t_end=4.0, align_ok=True):
    st = ControllerState()
    p = IfStartupParams()
    switches = {}
    for k in range(int(round(t_end / DT)) + 1):
        t = k * DT
        if align_ok and st.terminal == Terminal.ALIGN:
            st = replace(st, align_complete=True)
        new = transition_supervisor(st, t, lock_fn(t), cfg, p)
        if new.terminal != st.terminal:
            switches[new.terminal] = t
        st = new
    return st, switches


def test_scheduled_switch_times():
    st, sw = _drive_supervisor(TransitionConfig(), lambda t: LOCKED)
    assert sw[Terminal.ALIGN] == pytest.approx(2.5)
    assert sw[Terminal.T2_EST] == pytest.approx(3.0)
    assert sw[Terminal.T3_SENSORLESS] == pytest.approx(3.5)


def test_never_locked_holds_in_align():
    st, sw = _drive_supervisor(TransitionConfig(), lambda t: UNLOCKED)
    assert st.terminal == Terminal.ALIGN and st.align_hold
    assert Terminal.T2_EST not in sw


def test_condition_based_switches_early_on_fast_lock():
    cfg = TransitionConfig(mode="ConditionBased")
    st, sw = _drive_supervisor(cfg, lambda t: LOCKED)
    assert sw[Terminal.T2_EST] < 3.0
    assert sw[Terminal.T3_SENSORLESS] - sw[Terminal.T2_EST] == pytest.approx(cfg.t2_dwell)


def test_lock_loss_faults():
    st = replace(ControllerState(), terminal=Terminal.T3_SENSORLESS)
    st = transition_supervisor(st, 4.0, UNLOCKED, TransitionConfig(), IfStartupParams())
    assert st.terminal == Terminal.FAULT and st.fault


def test_t3_entry_copies_offset_and_preloads_speed_integrator():
    st = replace(ControllerState(), terminal=Terminal.T2_EST, align_offset=0.37, t_entry=3.0)
    new = transition_supervisor(st, 3.5, LOCKED, TransitionConfig(), IfStartupParams())
    assert new.terminal == Terminal.T3_SENSORLESS
    assert new.theta_c == 0.37 and new.integ_speed == IfStartupParams().i_q_star


def test_transform_angle_per_terminal():
    st = replace(ControllerState(), theta_star=1.0, align_offset=0.2, theta_c=0.3)
    assert select_transform_angle(st, 5.0) == 1.0
    assert select_transform_angle(replace(st, terminal=Terminal.T2_EST), 5.0) == 5.2
    assert select_transform_angle(replace(st, terminal=Terminal.T3_SENSORLESS), 5.0) == 5.3


def test_t2_to_t3_angle_exactly_continuous():
    st = replace(ControllerState(), terminal=Terminal.T2_EST, align_offset=-0.41)
    before = select_transform_angle(st, 7.0)
    new = transition_supervisor(st, 3.5, LOCKED, TransitionConfig(), IfStartupParams())
    assert select_transform_angle(new, 7.0) == before


@pytest.mark.parametrize("kwargs", [
    dict(t_align=3.2), dict(hc_dtheta=0.0), dict(hc_h=0), dict(mode="Fast"),
    dict(hc_r_comp=-1.0),
])
def test_transition_validation(kwargs):
    with pytest.raises(ParameterError):
        TransitionConfig(**kwargs)

"""
Deterministic scenario execution.

One control cycle: sample (and optionally delay and noise) the
measurements, run observer and PLL, let the supervisor pick the terminal,
run the regulators, integrate the CSI-fed plant for ``dt_ctrl/dt_plant``
sub-steps and append a trace row.
"""
import logging
import math
import time
import warnings
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from csidrive import controller as ctl
from csidrive.controller import Terminal, inverse_park, park, wrap
from csidrive.estimator import EstimatorState, estimator_step, lock_quality
from csidrive.integrators import advance_drive
from csidrive.plant import STATE_NAMES, pack_params

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "t", "theta_e", "theta_star", "theta_hat", "theta_used", "theta_c",
    "omega_m_rpm", "omega_hat_rpm", "i_a", "i_b", "i_c", "i_d_true", "i_q_true",
    "i_d_hat", "i_q_hat", "u_d_cmd", "u_q_cmd", "terminal", "delta_star_deg",
    "delta_hat_deg", "locked")

RAD_S_TO_RPM = 60.0 / (2.0 * math.pi)
SQRT3_2 = math.sqrt(3.0) / 2.0


class StallWarning(RuntimeWarning):
    """The virtual frame overtook the rotor during I-f startup."""


@dataclass
class Trace:
    """Per-control-cycle telemetry, one numpy column per trace field."""
    columns: dict
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.columns["t"])

    def __getitem__(self, name):
        return self.columns[name]

    @classmethod
    def empty(cls):
        return cls({c: np.zeros(0) for c in TRACE_COLUMNS})


def delay_line(sample, buffer, delay_cycles):
    """
    FIFO delay of exactly `delay_cycles` calls.

    `buffer` is a deque pre-filled with `delay_cycles` initial samples; it is
    updated in place. ``delay_cycles = 0`` returns `sample` unchanged.
    """
    if delay_cycles == 0:
        return sample
    buffer.append(sample)
    return buffer.popleft()


def quantize(x):
    """Round to the 9 significant digits written to trace files."""
    return float(f"{x:.9g}")


def control_cycle(cs, est, lock, i_meas_ab, t, sc, dt):
    """
    Supervisor and regulators for one control period.

    Returns ``(state, u_dq_cmd, theta_used, omega_elec)`` where
    `omega_elec` is the electrical speed used for decoupling.
    """
    cs = ctl.transition_supervisor(cs, t, lock, sc.transition, sc.startup)
    term = cs.terminal
    theta_star, omega_star, i_dq_if = ctl.if_reference(t, sc.startup, cs.theta_star, dt)
    # theta_star is the virtual angle at the current sample instant
    cs = replace(cs, theta_star=theta_star, omega_star=omega_star)

    if term == Terminal.FAULT:
        cs = replace(cs, i_dq_ref=(0.0, 0.0), u_dq_cmd=(0.0, 0.0))
        return cs, (0.0, 0.0), ctl.select_transform_angle(cs, est.theta_hat), 0.0

    if term == Terminal.ALIGN:
        cs = ctl.align_compensator_step(est.theta_hat, cs.theta_star, cs, sc.transition, dt)

    theta_used = ctl.select_transform_angle(cs, est.theta_hat)
    if term in (Terminal.T1_IF, Terminal.ALIGN):
        omega_elec = omega_ff = omega_star
    else:
        # the modulator follows the PLL angle, the feedforward terms use the
        # filtered speed so PLL transients do not leak into the voltage
        omega_elec, omega_ff = est.omega_hat, est.omega_filt

    if term == Terminal.T3_SENSORLESS:
        omega_ref = sc.startup.omega_target / sc.motor.pole_pairs
        omega_meas = est.omega_filt / sc.motor.pole_pairs
        first = cs.t_entry == t
        i_q_ref, cs = ctl.speed_loop_step(omega_ref, omega_meas, cs, sc.speed_pi, dt,
                                          bumpless=first)
        i_dq_ref = (0.0, i_q_ref)
    else:
        i_dq_ref = i_dq_if
    cs = replace(cs, i_dq_ref=i_dq_ref)

    i_dq = park(i_meas_ab, theta_used)
    u_dq, cs = ctl.current_loop_step(i_dq_ref, i_dq, omega_ff, cs, sc.current_pi,
                                     sc.line_model, dt)
    if term == Terminal.T3_SENSORLESS:
        # flux-like objective psi*cos(delta): resistive drop removed and
        # divided by the speed so that speed transients do not steer the climb
        signal = (u_dq[1] - sc.transition.hc_r_comp * i_dq[1]) / max(abs(est.omega_filt), 1e-6)
        cs = ctl.hillclimb_step(signal, cs, sc.transition)
    return cs, u_dq, theta_used, omega_elec


def run_scenario(sc, max_wall_time=None):
    """
    Simulate a scenario from standstill.

    Parameters
    ----------
    sc : Scenario
    max_wall_time : float, optional
        Abort with ``TimeoutError`` if the run exceeds this many seconds.

    Returns
    -------
    (Trace, Metrics)

    Raises
    ------
    NumericBlowupError
        If any plant state becomes non-finite.

    """
    from csidrive.metrics import compute_metrics

    trace = simulate(sc, max_wall_time=max_wall_time)
    return trace, compute_metrics(trace, sc.metrics)


def simulate(sc, max_wall_time=None):
    """Run the closed loop and return the :class:`Trace` (see :func:`run_scenario`)."""
    simc = sc.sim
    p, cab, fe = sc.motor, sc.cable, sc.front_end
    P = p.pole_pairs
    prm = pack_params(p, cab, fe, sc.load)
    dt = simc.dt_ctrl
    n_sub = simc.substeps
    n_cycles = simc.n_cycles
    rng = np.random.default_rng(simc.rng_seed)

    theta0 = sc.initial_rotor_angle
    assumed = theta0
    if simc.randomize_initial_angle:
        theta0 = float(rng.uniform(-math.pi, math.pi))
        assumed = 0.0
    x = np.zeros(len(STATE_NAMES))
    x[0] = theta0
    cs = ctl.ControllerState(theta_star=assumed - sc.startup.initial_lag)
    est = EstimatorState()
    eps_window = deque(maxlen=sc.pll.lock_window)
    zero = ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    buf = deque([zero] * simc.delay_cycles)
    u_ab_applied = (0.0, 0.0)

    rows = np.empty((n_cycles + 1, len(TRACE_COLUMNS)))
    stall_at = None
    fault_at = None
    noise = simc.noise_enabled and simc.current_noise_std > 0
    started = time.perf_counter()

    for k in range(n_cycles + 1):
        t = k * dt
        i_m = (x[2], x[3])
        i_s = i_m
        if noise:
            n1, n2 = rng.normal(0.0, simc.current_noise_std, 2)
            i_s = (i_m[0] + n1, i_m[1] + n2)
        v_out = (x[4], x[5])
        i_meas, v_meas, u_meas = delay_line((i_s, v_out, u_ab_applied), buf,
                                            simc.delay_cycles)

        u_obs = u_meas if simc.feedback_mode == "CommandVoltage" else v_meas
        est = estimator_step(i_meas, u_obs, est, sc.line_model, sc.observer, sc.pll, dt)
        eps_window.append(est.eps)
        lock = lock_quality(est, eps_window, sc.pll)

        cs, u_dq, theta_used, omega_elec = control_cycle(cs, est, lock, i_meas, t, sc, dt)
        if cs.terminal == Terminal.FAULT and fault_at is None:
            fault_at = t
            log.warning("fault at t=%.4f s: %s", t, cs.fault)

        theta_e = x[0]
        delta_star = wrap(theta_e - cs.theta_star)
        if cs.terminal == Terminal.T1_IF and delta_star <= 0.0 and stall_at is None:
            stall_at = t
            warnings.warn(f"self-stabilization lost at t={t:.4f} s: rotor fell behind "
                          f"the virtual frame (delta*={math.degrees(delta_star):.2f} deg)",
                          StallWarning, stacklevel=2)
        delta_hat = wrap(theta_e - est.theta_hat - cs.theta_c)

        i_dq_true = park(i_m, theta_e)
        i_dq_hat = park(i_m, theta_used)
        rows[k] = (
            t, theta_e, cs.theta_star, est.theta_hat, theta_used, cs.theta_c,
            x[1] * RAD_S_TO_RPM, est.omega_hat / P * RAD_S_TO_RPM,
            i_m[0], -0.5 * i_m[0] + SQRT3_2 * i_m[1], -0.5 * i_m[0] - SQRT3_2 * i_m[1],
            i_dq_true[0], i_dq_true[1], i_dq_hat[0], i_dq_hat[1], u_dq[0], u_dq[1],
            int(cs.terminal), math.degrees(delta_star), math.degrees(delta_hat),
            1.0 if lock.locked else 0.0)

        if k == n_cycles or (fault_at is not None and simc.stop_on_fault):
            rows = rows[:k + 1]
            break

        # mean applied vector over the coming period, seen by the observer
        u_ab_applied = inverse_park(u_dq, theta_used + 0.5 * omega_elec * dt)
        x = advance_drive(x, u_dq, theta_used, omega_elec, prm, fe, simc.dt_plant,
                          n_sub, simc.integrator, t=t)
        if max_wall_time is not None and time.perf_counter() - started > max_wall_time:
            raise TimeoutError(f"run exceeded {max_wall_time} s of wall time at t={t:.3f} s")

    cols = {name: np.array([quantize(v) for v in rows[:, j]])
            for j, name in enumerate(TRACE_COLUMNS)}
    meta = {
        "stall_detected": stall_at is not None,
        "stall_time": stall_at,
        "fault": cs.fault,
        "fault_time": fault_at,
        "align_hold": cs.align_hold,
        "hc_converged": cs.hc_converged,
        "wall_time": time.perf_counter() - started,
    }
    return Trace(cols, meta)

"""
Startup and sensorless FOC controller.

Terminals follow the three-step procedure: I-f startup in a virtual frame
(T1_IF), alignment of the estimated frame to the virtual one (ALIGN), current
control in the aligned estimated frame with the startup current held
(T2_EST), and closed speed loop with hill-climbing position-error
compensation (T3_SENSORLESS).
"""
import math
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from csidrive.errors import check

TWO_PI = 2.0 * math.pi


class Terminal(IntEnum):
    T1_IF = 1
    ALIGN = 2
    T2_EST = 3
    T3_SENSORLESS = 4
    FAULT = 9


def wrap(angle):
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


def park(x_ab, theta):
    """Rotate an alpha-beta pair into the frame at `theta`."""
    c, s = math.cos(theta), math.sin(theta)
    return c * x_ab[0] + s * x_ab[1], -s * x_ab[0] + c * x_ab[1]


def inverse_park(x_dq, theta):
    """Rotate a dq pair from the frame at `theta` back to alpha-beta."""
    c, s = math.cos(theta), math.sin(theta)
    return c * x_dq[0] - s * x_dq[1], s * x_dq[0] + c * x_dq[1]


# %%
@dataclass(frozen=True)
class IfStartupParams:
    """
    I-f startup settings.

    Parameters
    ----------
    K_omega : float
        Slope of the speed ramp (electrical rad/s²).
    i_q_star, i_d_star : float
        Current references held in the virtual frame (A).
    omega_target : float
        Final electrical speed (rad/s); 2π·30 is 300 rpm with 6 pole pairs.
    initial_lag : float
        Lag of the virtual frame behind the rotor at t = 0 (rad).

    """
    K_omega: float = 125.66
    i_q_star: float = 3.0
    i_d_star: float = 0.0
    omega_target: float = TWO_PI * 30.0
    initial_lag: float = math.pi / 2.0

    def __post_init__(self):
        check(self.K_omega > 0, "startup.K_omega", "rad/s^2", self.K_omega, "> 0")
        check(self.i_q_star >= 0, "startup.i_q_star", "A", self.i_q_star, ">= 0")
        check(self.omega_target > 0, "startup.omega_target", "rad/s",
              self.omega_target, "> 0")
        check(0 < self.initial_lag <= math.pi, "startup.initial_lag", "rad",
              self.initial_lag, "in (0, pi]")


@dataclass(frozen=True)
class PiGains:
    """PI gains with an output clamp; the integrator stops when clamped."""
    kp: float
    ki: float
    output_min: float
    output_max: float

    def __post_init__(self):
        check(self.kp >= 0, "pi.kp", "-", self.kp, ">= 0")
        check(self.ki >= 0, "pi.ki", "-", self.ki, ">= 0")
        check(self.output_min < self.output_max, "pi.output_min", "-",
              self.output_min, f"< output_max ({self.output_max})")


def default_current_gains(mp, omega_cc=TWO_PI * 300.0, u_max=400.0):
    """Current-loop gains ``kp = L_s*w_cc``, ``ki = R_s*w_cc``."""
    return PiGains(mp.L_s * omega_cc, mp.R_s * omega_cc, -u_max, u_max)


def default_speed_gains(mp, omega_sc=TWO_PI * 20.0, i_max=4.0):
    """Speed-loop gains on mechanical speed; output is the q-axis current (A)."""
    kp = mp.J * omega_sc / mp.k_e
    return PiGains(kp, kp * omega_sc / 5.0, -i_max, i_max)


@dataclass(frozen=True)
class TransitionConfig:
    """
    Terminal switching, alignment and hill-climb settings.

    `hc_stop_band` is the largest spread of compensation angles visited
    during the final oscillation that still counts as converged.
    `hc_r_comp` (Ω) is the resistance whose drop ``hc_r_comp*i_q`` is taken
    off the q-axis voltage before it is fed to the hill climb; ``None``
    resolves to stator plus cable resistance at scenario level and ``0``
    climbs on the raw voltage command.

    """
    mode: str = "Scheduled"
    t_align: float = 2.5
    t_to_T2: float = 3.0
    t_to_T3: float = 3.5
    align_ramp_rate: float = 5.0
    align_tol: float = 0.01
    align_dwell: float = 0.02
    t2_dwell: float = 0.5
    settle_dwell: float = 0.1
    hc_dtheta: float = 0.005
    hc_h: int = 10
    hc_stop_band: float = 0.02
    hc_r_comp: float = None

    def __post_init__(self):
        check(self.mode in ("Scheduled", "ConditionBased"), "transition.mode", "-",
              self.mode, "'Scheduled' or 'ConditionBased'")
        check(0 <= self.t_align < self.t_to_T2 < self.t_to_T3, "transition.t_align",
              "s", (self.t_align, self.t_to_T2, self.t_to_T3),
              "ordered t_align < t_to_T2 < t_to_T3")
        check(self.align_ramp_rate > 0, "transition.align_ramp_rate", "rad/s",
              self.align_ramp_rate, "> 0")
        check(self.align_tol > 0, "transition.align_tol", "rad", self.align_tol, "> 0")
        check(self.align_dwell >= 0, "transition.align_dwell", "s", self.align_dwell, ">= 0")
        check(self.t2_dwell >= 0, "transition.t2_dwell", "s", self.t2_dwell, ">= 0")
        check(self.settle_dwell >= 0, "transition.settle_dwell", "s",
              self.settle_dwell, ">= 0")
        check(self.hc_dtheta > 0, "transition.hc_dtheta", "rad", self.hc_dtheta, "> 0")
        check(isinstance(self.hc_h, (int, np.integer)) and self.hc_h >= 1,
              "transition.hc_h", "cycles", self.hc_h, "an integer >= 1")
        check(self.hc_stop_band > 0, "transition.hc_stop_band", "rad",
              self.hc_stop_band, "> 0")
        if self.hc_r_comp is not None:
            check(self.hc_r_comp >= 0, "transition.hc_r_comp", "ohm", self.hc_r_comp,
                  ">= 0")


@dataclass(frozen=True)
class ControllerState:
    terminal: Terminal = Terminal.T1_IF
    t_entry: float = 0.0
    theta_star: float = 0.0
    omega_star: float = 0.0
    align_offset: float = 0.0
    align_target: float = 0.0
    align_in_tol_time: float = 0.0
    align_complete: bool = False
    align_hold: bool = False
    theta_c: float = 0.0
    hc_sign: int = 1
    hc_prev_uq: float = None
    hc_cycle_count: int = 0
    uq_accum: float = 0.0
    hc_flips: int = 0
    hc_keeps: int = 0
    hc_visited: tuple = ()
    hc_decisions: int = 0
    hc_converged: bool = False
    integ_d: float = 0.0
    integ_q: float = 0.0
    integ_speed: float = 0.0
    i_dq_ref: tuple = (0.0, 0.0)
    u_dq_cmd: tuple = (0.0, 0.0)
    fault: str = None


# %%
def pi_step(error, integ, gains, dt, feedforward=0.0):
    """
    One PI update with clamping anti-windup.

    Returns ``(output, integrator)``. The integrator is frozen while the
    output sits on a limit and the error would drive it further out.

    """
    new_integ = integ + gains.ki * error * dt
    u = gains.kp * error + new_integ + feedforward
    if u > gains.output_max:
        u = gains.output_max
        if error > 0:
            new_integ = integ
    elif u < gains.output_min:
        u = gains.output_min
        if error < 0:
            new_integ = integ
    return u, new_integ


def if_reference(t, p, theta_star_prev, dt):
    """
    I-f reference generator.

    Returns ``(theta_star, omega_star, i_dq_ref)``; the virtual angle is the
    running integral of the saturated speed ramp.

    """
    omega = min(p.K_omega * t, p.omega_target)
    return theta_star_prev + omega * dt, omega, (p.i_d_star, p.i_q_star)


def current_loop_step(i_dq_ref, i_dq_meas, omega_elec, st, gains, mp, dt):
    """
    dq current regulators with cross-coupling and EMF feedforward.

    Returns ``(u_dq_cmd, state)``.

    """
    L = mp.L_s
    ff_d = -omega_elec * L * i_dq_meas[1]
    ff_q = omega_elec * L * i_dq_meas[0] + omega_elec * mp.flux_elec
    u_d, integ_d = pi_step(i_dq_ref[0] - i_dq_meas[0], st.integ_d, gains, dt, ff_d)
    u_q, integ_q = pi_step(i_dq_ref[1] - i_dq_meas[1], st.integ_q, gains, dt, ff_q)
    return (u_d, u_q), replace(st, integ_d=integ_d, integ_q=integ_q, u_dq_cmd=(u_d, u_q))


def speed_loop_step(omega_ref, omega_hat, st, gains, dt, bumpless=False):
    """
    Speed PI (mechanical rad/s in, q-axis current out).

    With `bumpless` set, the integrator is first re-seeded so that this
    call returns ``st.integ_speed`` unchanged, whatever the speed error.
    Returns ``(i_q_ref, state)``.
    """
    error = omega_ref - omega_hat
    integ = st.integ_speed
    if bumpless:
        integ = integ - gains.kp * error - gains.ki * error * dt
    i_q, integ = pi_step(error, integ, gains, dt)
    return i_q, replace(st, integ_speed=integ)


def align_compensator_step(theta_hat, theta_star, st, cfg, dt):
    """
    Slew the alignment offset toward ``wrap(theta_star - theta_hat)``.

    The offset moves at most ``align_ramp_rate*dt`` per call. Alignment is
    complete once the offset has stayed within `align_tol` of its target for
    `align_dwell` seconds.
    """
    target = wrap(theta_star - theta_hat)
    gap = wrap(target - st.align_offset)
    step = cfg.align_ramp_rate * dt
    offset = st.align_offset + min(max(gap, -step), step)
    remaining = abs(wrap(target - offset))
    in_tol = st.align_in_tol_time + dt if remaining < cfg.align_tol else 0.0
    complete = remaining < cfg.align_tol and in_tol >= cfg.align_dwell
    return replace(st, align_offset=offset, align_target=target,
                   align_in_tol_time=in_tol, align_complete=complete)


def hillclimb_step(u_q_cmd_now, st, cfg):
    """
    One control cycle of the hill-climbing compensation-angle search.

    The q-axis voltage command is averaged over `hc_h` cycles. At every
    window boundary the average is compared with the previous window: an
    increase keeps the search direction, anything else reverses it. The
    angle then moves by `hc_dtheta` in the current direction.

    The search stops after three reversals not separated by two successive
    keeps, provided the visited angles span at most `hc_stop_band`; the
    angle is then held at the centre of that oscillation.

    Returns the updated state; the new angle is ``state.theta_c``.
    """
    if st.hc_converged:
        return st
    accum = st.uq_accum + u_q_cmd_now
    count = st.hc_cycle_count + 1
    if count < cfg.hc_h:
        return replace(st, uq_accum=accum, hc_cycle_count=count)

    avg = accum / cfg.hc_h
    sign, flips, keeps = st.hc_sign, st.hc_flips, st.hc_keeps
    if st.hc_prev_uq is None or avg > st.hc_prev_uq:
        keeps += 1
        if keeps >= 2:
            flips = 0
    else:
        sign = -sign
        flips += 1
        keeps = 0
    visited = (st.hc_visited + (st.theta_c,))[-5:]
    st = replace(st, uq_accum=0.0, hc_cycle_count=0, hc_prev_uq=avg, hc_sign=sign,
                 hc_flips=flips, hc_keeps=keeps, hc_visited=visited,
                 hc_decisions=st.hc_decisions + 1)
    if flips >= 3:
        lo, hi = min(visited), max(visited)
        if hi - lo <= cfg.hc_stop_band + 1e-12:
            return replace(st, theta_c=0.5 * (lo + hi), hc_converged=True)
    return replace(st, theta_c=st.theta_c + sign * cfg.hc_dtheta)


def select_transform_angle(st, theta_hat):
    """Angle of the frame the current controller works in."""
    if st.terminal in (Terminal.T1_IF, Terminal.ALIGN, Terminal.FAULT):
        return st.theta_star
    if st.terminal == Terminal.T2_EST:
        return theta_hat + st.align_offset
    return theta_hat + st.theta_c


def _enter(st, terminal, t, **changes):
    return replace(st, terminal=terminal, t_entry=t, **changes)


def transition_supervisor(st, t, lock, cfg, startup):
    """
    Advance the terminal state machine.

    Scheduled mode switches at the configured instants, except that the
    ALIGN to T2_EST switch waits (and sets `align_hold`) until alignment is
    complete and the estimator is locked. ConditionBased mode leaves T1_IF
    once the ramp has been saturated for `settle_dwell` and the estimator is
    locked, leaves ALIGN as soon as alignment completes, and leaves T2_EST
    after `t2_dwell`. Loss of lock in
    T2_EST or T3_SENSORLESS moves to FAULT.

    Entry actions: the alignment offset restarts at zero in ALIGN, the
    compensation angle takes over the frozen offset in T3_SENSORLESS and the
    speed integrator is preloaded with `i_q_star` so the handover is bumpless.
    """
    term = st.terminal
    if term == Terminal.FAULT:
        return st
    if term in (Terminal.T2_EST, Terminal.T3_SENSORLESS) and not lock.locked:
        return _enter(st, Terminal.FAULT, t, fault="estimator lock lost")

    scheduled = cfg.mode == "Scheduled"
    if term == Terminal.T1_IF:
        if scheduled:
            go = t >= cfg.t_align - 1e-12
        else:
            t_sat = startup.omega_target / startup.K_omega
            go = t >= t_sat + cfg.settle_dwell - 1e-12 and lock.locked
        if go:
            return _enter(st, Terminal.ALIGN, t, align_offset=0.0, align_in_tol_time=0.0,
                          align_complete=False)
    elif term == Terminal.ALIGN:
        due = (t >= cfg.t_to_T2 - 1e-12) if scheduled else True
        if due:
            if st.align_complete and lock.locked:
                return _enter(st, Terminal.T2_EST, t, align_hold=False)
            if scheduled:
                return replace(st, align_hold=True)
    elif term == Terminal.T2_EST:
        if scheduled:
            go = t >= cfg.t_to_T3 - 1e-12
        else:
            go = t - st.t_entry >= cfg.t2_dwell - 1e-12
        if go:
            return _enter(st, Terminal.T3_SENSORLESS, t, theta_c=st.align_offset,
                          integ_speed=startup.i_q_star, hc_sign=1, hc_prev_uq=None,
                          hc_cycle_count=0, uq_accum=0.0, hc_flips=0, hc_keeps=0,
                          hc_visited=(), hc_decisions=0, hc_converged=False)
    return st


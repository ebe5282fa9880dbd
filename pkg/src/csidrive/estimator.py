"""
Back-EMF observer and PLL for sensorless rotor-position estimation.

The observer runs the stationary-frame current model of the PMSM and treats
the back-EMF as an unknown disturbance. Its disturbance estimate is filtered
in a frame rotating at the PLL speed, so a constant-speed EMF is tracked
without phase lag. The PLL locks onto the direction of the estimated EMF.

"""
import math
from dataclasses import dataclass, replace

import numpy as np

from csidrive.errors import NumericBlowupError, check


@dataclass(frozen=True)
class ObserverParams:
    """
    Observer gains.

    Parameters
    ----------
    g_obs : float
        Current-error correction gain (1/s).
    emf_filter_cutoff : float
        Bandwidth of the EMF disturbance filter (rad/s).
    rotating_model : bool
        Filter the EMF in the frame rotating at the estimated speed.

    """
    g_obs: float = 2000.0
    emf_filter_cutoff: float = 1500.0
    rotating_model: bool = True

    def __post_init__(self):
        check(self.g_obs > 0, "observer.g_obs", "1/s", self.g_obs, "> 0")
        check(self.emf_filter_cutoff > 0, "observer.emf_filter_cutoff", "rad/s",
              self.emf_filter_cutoff, "> 0")


@dataclass(frozen=True)
class PllParams:
    """
    PLL gains and lock-detection thresholds.

    `emf_floor` is the EMF magnitude (V) below which the phase detector is
    considered untrustworthy; the default equals ``0.05*k_e*w_min`` for the
    default machine with ``w_min`` = 30 rpm. `omega_filter_cutoff` (rad/s)
    sets the low-pass filter that produces `omega_filt` for speed control.

    """
    kp_pll: float = 200.0
    ki_pll: float = 10000.0
    omega_hat_limit: float = 2000.0
    emf_floor: float = 0.2
    lock_emf_min: float = 5.0
    lock_eps_rms_max: float = 0.15
    lock_window: int = 100
    omega_filter_cutoff: float = 300.0

    def __post_init__(self):
        check(self.kp_pll > 0, "pll.kp_pll", "rad/s", self.kp_pll, "> 0")
        check(self.ki_pll > 0, "pll.ki_pll", "rad/s^2", self.ki_pll, "> 0")
        check(self.omega_hat_limit > 0, "pll.omega_hat_limit", "rad/s",
              self.omega_hat_limit, "> 0")
        check(self.emf_floor > 0, "pll.emf_floor", "V", self.emf_floor, "> 0")
        check(self.lock_emf_min >= 0, "pll.lock_emf_min", "V", self.lock_emf_min, ">= 0")
        check(self.lock_eps_rms_max > 0, "pll.lock_eps_rms_max", "-",
              self.lock_eps_rms_max, "> 0")
        check(isinstance(self.lock_window, (int, np.integer)) and self.lock_window >= 1,
              "pll.lock_window", "cycles", self.lock_window, "an integer >= 1")
        check(self.omega_filter_cutoff > 0, "pll.omega_filter_cutoff", "rad/s",
              self.omega_filter_cutoff, "> 0")


@dataclass(frozen=True)
class EstimatorState:
    """Observer and PLL states; angles are electrical and unwrapped."""
    i_hat_ab: tuple = (0.0, 0.0)
    e_hat_ab: tuple = (0.0, 0.0)
    theta_hat: float = 0.0
    omega_hat: float = 0.0
    omega_filt: float = 0.0
    pll_integrator: float = 0.0
    eps: float = 0.0
    emf_ok: bool = False


@dataclass(frozen=True)
class LockReport:
    locked: bool
    emf_mag: float
    eps_rms: float


def _finite(*vals):
    for v in vals:
        if not math.isfinite(v):
            return False
    return True


def observer_step(i_meas_ab, u_cmd_ab, st, mp, op, dt):
    """
    Advance the back-EMF observer by one control period.

    The estimates are first propagated through the current model
    ``L di/dt = -R i + u - e_hat`` under the voltage applied during the
    elapsed period, then corrected with the fresh current sample: the
    current estimate moves by ``dt*g*(i_meas - i_hat)`` and the EMF
    estimate absorbs the matching disturbance ``-L*g*(i_meas - i_hat)``
    through a first-order filter of bandwidth `emf_filter_cutoff`. When
    `op.rotating_model` is set the EMF estimate also rotates at
    ``st.omega_hat`` between samples, so a constant-speed EMF is followed
    without steady-state error. Because the correction accounts for the
    mean EMF over the elapsed period and is then rotated forward, the
    returned `e_hat_ab` describes the EMF around the middle of the coming
    period.

    Parameters
    ----------
    i_meas_ab : tuple of float
        Motor currents sampled now (A).
    u_cmd_ab : tuple of float
        Voltage applied over the elapsed period (V), commanded or measured.
    st : EstimatorState
    mp : MotorParams
        Controller-side machine parameters (only `R_s` and `L_s` are used).
    op : ObserverParams
    dt : float
        Control period (s).

    Returns
    -------
    EstimatorState

    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    ia, ib = i_meas_ab
    ua, ub = u_cmd_ab
    if not _finite(ia, ib, ua, ub):
        raise NumericBlowupError("observer input")
    L, R, g = mp.L_s, mp.R_s, op.g_obs
    iha, ihb = st.i_hat_ab
    eha, ehb = st.e_hat_ab

    iha = iha + dt * (-R * iha + ua - eha) / L
    ihb = ihb + dt * (-R * ihb + ub - ehb) / L
    if op.rotating_model and st.omega_hat != 0.0:
        phi = st.omega_hat * dt
        c, s = math.cos(phi), math.sin(phi)
        eha, ehb = c * eha - s * ehb, s * eha + c * ehb

    ca = L * g * (ia - iha)
    cb = L * g * (ib - ihb)
    k = dt * op.emf_filter_cutoff
    return replace(st, i_hat_ab=(iha + dt * ca / L, ihb + dt * cb / L),
                   e_hat_ab=(eha - k * ca, ehb - k * cb))


def phase_error(e_hat_ab, theta_hat, floor):
    """
    Normalised quadrature phase detector.

    Returns ``(eps, ok)``. For an exact EMF at positive speed ``eps`` equals
    ``sin(theta_e - theta_hat)``. `ok` is False when the EMF magnitude is
    below `floor`.

    """
    ea, eb = e_hat_ab
    mag = math.hypot(ea, eb)
    num = -ea * math.cos(theta_hat) - eb * math.sin(theta_hat)
    return num / max(mag, floor), mag >= floor


def pll_step(e_hat_ab, st, pp, dt):
    """
    Advance the PLL by one period.

    The speed estimate is the PI output on the phase error and the angle is
    its integral, so the returned `theta_hat` is the prediction for the next
    sample instant. Below the EMF floor the phase error is ignored and the
    angle coasts on the last speed; `emf_ok` reports that condition.
    `omega_filt` follows the speed estimate through a first-order lag.

    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    eps, ok = phase_error(e_hat_ab, st.theta_hat, pp.emf_floor)
    a = min(pp.omega_filter_cutoff * dt, 1.0)
    if not ok:
        return replace(st, theta_hat=st.theta_hat + st.omega_hat * dt, eps=eps,
                       emf_ok=False,
                       omega_filt=st.omega_filt + a * (st.omega_hat - st.omega_filt))
    lim = pp.omega_hat_limit
    omega = min(max(st.pll_integrator + pp.kp_pll * eps, -lim), lim)
    integ = st.pll_integrator + pp.ki_pll * eps * dt
    return replace(st, omega_hat=omega, pll_integrator=integ,
                   omega_filt=st.omega_filt + a * (omega - st.omega_filt),
                   theta_hat=st.theta_hat + omega * dt, eps=eps, emf_ok=True)


def estimator_step(i_meas_ab, u_ab, st, mp, op, pp, dt):
    """Observer followed by the PLL on the freshly updated EMF estimate."""
    st = observer_step(i_meas_ab, u_ab, st, mp, op, dt)
    return pll_step(st.e_hat_ab, st, pp, dt)


def lock_quality(st, eps_window, pp):
    """
    Lock predicate over a window of recent phase-detector samples.

    Parameters
    ----------
    st : EstimatorState
    eps_window : sequence of float
        Recent phase errors, non-empty.
    pp : PllParams

    Returns
    -------
    LockReport

    """
    if len(eps_window) == 0:
        raise ValueError("eps_window must be non-empty")
    emf = math.hypot(*st.e_hat_ab)
    rms = math.sqrt(sum(e * e for e in eps_window) / len(eps_window))
    locked = emf > pp.lock_emf_min and rms < pp.lock_eps_rms_max
    return LockReport(locked=locked, emf_mag=emf, eps_rms=rms)

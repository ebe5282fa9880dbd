"""Fixed-step explicit integrators."""
import math

import numpy as np
from numba import njit

from csidrive.errors import NumericBlowupError
from csidrive.plant import STATE_NAMES, _rhs

EULER = "Euler"
RK4 = "RK4"
METHODS = (EULER, RK4)


def integrate_step(x, f, dt, method=RK4, t=None):
    """
    Advance ``dx/dt = f(x)`` by one step.

    Parameters
    ----------
    x : ndarray
        Current state.
    f : callable
        Derivative function returning an array shaped like `x`.
    dt : float
        Step size (s), must be positive.
    method : {"Euler", "RK4"}
    t : float, optional
        Time stamp reported if the result is not finite.

    Returns
    -------
    ndarray
        State after the step.

    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    x = np.asarray(x, dtype=np.float64)
    if method == EULER:
        x_new = x + dt * f(x)
    elif method == RK4:
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError(f"unknown integrator {method!r}; expected one of {METHODS}")
    bad = np.flatnonzero(~np.isfinite(x_new))
    if bad.size:
        raise NumericBlowupError(f"state[{bad[0]}]", t)
    return x_new


@njit(cache=True)
def _advance(x, u, prm, dt, n, use_rk4):
    # Plant sub-steps under a zero-order-held input, with the stiction clamp
    # applied whenever the speed crosses zero while |T_e| <= T_0.
    k_e = prm[2]
    T_0 = prm[6]
    for _ in range(n):
        w_prev = x[1]
        if use_rk4:
            k1 = _rhs(x, u, prm)
            k2 = _rhs(x + 0.5 * dt * k1, u, prm)
            k3 = _rhs(x + 0.5 * dt * k2, u, prm)
            k4 = _rhs(x + dt * k3, u, prm)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            x = x + dt * _rhs(x, u, prm)
        w = x[1]
        if w_prev != 0.0 and w * w_prev <= 0.0:
            T_e = k_e * (-x[2] * math.sin(x[0]) + x[3] * math.cos(x[0]))
            if abs(T_e) <= T_0:
                x[1] = 0.0
    return x


@njit(cache=True)
def _csi_current(x, u_a, u_b, omega, g, C_o, cabled):
    # Output-voltage regulation of the averaged CSI: cable-current and
    # capacitor-current feedforward plus proportional correction, limited to
    # the available DC-link current.
    ic_a = x[6] if cabled else x[2]
    ic_b = x[7] if cabled else x[3]
    ia = ic_a - C_o * omega * u_b + g * (u_a - x[4])
    ib = ic_b + C_o * omega * u_a + g * (u_b - x[5])
    mag = math.sqrt(ia * ia + ib * ib)
    lim = max(x[10], 0.0)
    if mag > lim:
        scale = lim / mag if mag > 0.0 else 0.0
        ia *= scale
        ib *= scale
    return ia, ib


@njit(cache=True)
def _advance_drive(x, cmd, prm, dt, n, use_rk4):
    # cmd = (u_d, u_q, theta0, omega, C_o/tau_v, i_dc_ref). The modulator
    # turns the dq command at the frame speed within the control period and
    # the voltage regulator is re-evaluated at every sub-step.
    u_d, u_q, th0, omega, g, i_dc_ref = cmd[0], cmd[1], cmd[2], cmd[3], cmd[4], cmd[5]
    C_o = prm[11]
    cabled = prm[13] > 0.5
    u = np.empty(3)
    u[2] = i_dc_ref
    for j in range(n):
        th = th0 + omega * (j + 0.5) * dt
        c = math.cos(th)
        s = math.sin(th)
        u_a = c * u_d - s * u_q
        u_b = s * u_d + c * u_q
        u[0], u[1] = _csi_current(x, u_a, u_b, omega, g, C_o, cabled)
        x = _advance(x, u, prm, dt, 1, use_rk4)
    return x


def advance_drive(x, u_dq, theta0, omega, prm, fe, dt, n, method=RK4, t=None):
    """
    Integrate the plant fed by the voltage-regulated CSI for `n` sub-steps.

    Parameters
    ----------
    x : ndarray
        Packed plant state.
    u_dq : tuple of float
        Voltage command (V) in the frame at angle `theta0` at the start of
        the period; the frame turns at `omega` (rad/s) during the period.
    prm : ndarray
        From :func:`csidrive.plant.pack_params`.
    fe : DriveFrontEnd
    dt : float
        Plant step (s).
    n : int
        Number of sub-steps.

    """
    if method not in METHODS:
        raise ValueError(f"unknown integrator {method!r}; expected one of {METHODS}")
    cmd = np.array([u_dq[0], u_dq[1], theta0, omega, fe.C_o / fe.tau_v, fe.i_dc_rated])
    x_new = _advance_drive(np.asarray(x, dtype=np.float64), cmd, prm, dt, n,
                           method == RK4)
    bad = np.flatnonzero(~np.isfinite(x_new))
    if bad.size:
        raise NumericBlowupError(STATE_NAMES[bad[0]], t)
    return x_new


def advance_plant(x, u, prm, dt, n, method=RK4, t=None):
    """
    Integrate the plant `n` sub-steps of `dt` with input `u` held constant.

    `x` is the packed state array (see :mod:`csidrive.plant`), `u` is
    ``(i_inv_alpha, i_inv_beta, i_dc_ref)`` and `prm` comes from
    :func:`csidrive.plant.pack_params`.

    """
    if method not in METHODS:
        raise ValueError(f"unknown integrator {method!r}; expected one of {METHODS}")
    x_new = _advance(np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64),
                     prm, dt, n, method == RK4)
    bad = np.flatnonzero(~np.isfinite(x_new))
    if bad.size:
        raise NumericBlowupError(STATE_NAMES[bad[0]], t)
    return x_new

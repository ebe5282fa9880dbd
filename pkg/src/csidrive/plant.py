"""
Continuous-time model of the CSI-fed PMSM drive.

The plant comprises the surface-mounted PMSM in stationary (alpha-beta)
coordinates, the inverter output capacitor, a lumped long-cable section
(series R-L with a shunt capacitor at the motor end), the rotor mechanics
with a pump-type load, and a first-order model of the regulated DC-link
current. The inverter itself is an averaged current injector: the caller
supplies the alpha-beta current fed into the output-capacitor node.

State vector layout (used by the integrators and the jitted kernels)::

    0 theta_e   electrical rotor angle (rad, unwrapped)
    1 omega_m   mechanical speed (rad/s)
    2,3         motor alpha-beta currents (A)
    4,5         output-capacitor alpha-beta voltages (V)
    6,7         cable alpha-beta currents (A)
    8,9         cable shunt-capacitor alpha-beta voltages (V)
    10 i_dc     DC-link current (A)

Power is computed as ``v_alpha*i_alpha + v_beta*i_beta`` throughout so that
the torque expression, the stored energy and the injected power close
without any extra scale factor.

"""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from csidrive.errors import NumericBlowupError, check

N_STATE = 11
STATE_NAMES = (
    "theta_e", "omega_m", "i_motor_alpha", "i_motor_beta", "v_Co_alpha",
    "v_Co_beta", "i_cable_alpha", "i_cable_beta", "v_Cc_alpha", "v_Cc_beta",
    "i_dc")

TOPOLOGIES = ("Direct", "SeriesRLShuntC")


# %%
@dataclass(frozen=True)
class MotorParams:
    """
    PMSM parameters.

    Parameters
    ----------
    R_s : float
        Stator resistance (Ω).
    L_s : float
        Synchronous inductance (H).
    psi_f : float
        Permanent-magnet flux linkage (Wb).
    pole_pairs : int
        Number of pole pairs.
    J : float
        Rotor plus load inertia (kg·m²).
    B_visc : float
        Viscous friction coefficient (N·m·s/rad).

    """
    R_s: float = 2.16
    L_s: float = 4.56e-3
    psi_f: float = 0.25
    pole_pairs: int = 6
    J: float = 0.01
    B_visc: float = 1e-4

    def __post_init__(self):
        check(self.R_s > 0, "motor.R_s", "ohm", self.R_s, "> 0")
        check(self.L_s > 0, "motor.L_s", "H", self.L_s, "> 0")
        check(self.psi_f > 0, "motor.psi_f", "Wb", self.psi_f, "> 0")
        check(isinstance(self.pole_pairs, (int, np.integer))
              and not isinstance(self.pole_pairs, bool)
              and self.pole_pairs >= 1,
              "motor.pole_pairs", "-", self.pole_pairs, "an integer >= 1")
        check(self.J > 0, "motor.J", "kg*m^2", self.J, "> 0")
        check(self.B_visc >= 0, "motor.B_visc", "N*m*s/rad", self.B_visc, ">= 0")

    @property
    def k_e(self):
        """Back-EMF constant per mechanical rad/s (V·s/rad)."""
        return math.sqrt(3.0) / 2.0 * self.psi_f * self.pole_pairs

    @property
    def flux_elec(self):
        """Effective flux constant k_e/P used by dq-frame decoupling (Wb)."""
        return self.k_e / self.pole_pairs


@dataclass(frozen=True)
class CableParams:
    """Lumped cable section; `topology` is ``"Direct"`` or ``"SeriesRLShuntC"``."""
    R_c: float = 11.76
    L_c: float = 9.7e-3
    C_c: float = 111e-9
    topology: str = "SeriesRLShuntC"

    def __post_init__(self):
        check(self.topology in TOPOLOGIES, "cable.topology", "-", self.topology,
              f"one of {TOPOLOGIES}")
        check(self.R_c >= 0, "cable.R_c", "ohm", self.R_c, ">= 0")
        check(self.L_c >= 0, "cable.L_c", "H", self.L_c, ">= 0")
        check(self.C_c >= 0, "cable.C_c", "F", self.C_c, ">= 0")
        if self.topology == "SeriesRLShuntC":
            check(self.L_c > 0, "cable.L_c", "H", self.L_c,
                  "> 0 for SeriesRLShuntC")
            check(self.C_c > 0, "cable.C_c", "F", self.C_c,
                  "> 0 for SeriesRLShuntC")


@dataclass(frozen=True)
class DriveFrontEnd:
    """
    Averaged CSI front end.

    Only `C_o`, `i_dc_rated` and `tau_dc` enter the plant dynamics; `tau_v`
    is the time constant of the inverter's local output-voltage regulation.
    `L_dc`, `V_g` and `f_g` are carried for provenance.

    """
    C_o: float = 50e-6
    i_dc_rated: float = 6.0
    tau_dc: float = 0.02
    tau_v: float = 5e-5
    L_dc: float = 10e-3
    V_g: float = 480.0
    f_g: float = 60.0

    def __post_init__(self):
        check(self.C_o > 0, "front_end.C_o", "F", self.C_o, "> 0")
        check(self.i_dc_rated > 0, "front_end.i_dc_rated", "A", self.i_dc_rated, "> 0")
        check(self.tau_dc > 0, "front_end.tau_dc", "s", self.tau_dc, "> 0")
        check(self.tau_v > 0, "front_end.tau_v", "s", self.tau_v, "> 0")
        check(self.L_dc >= 0, "front_end.L_dc", "H", self.L_dc, ">= 0")
        check(self.V_g >= 0, "front_end.V_g", "V", self.V_g, ">= 0")
        check(self.f_g >= 0, "front_end.f_g", "Hz", self.f_g, ">= 0")


@dataclass(frozen=True)
class LoadModel:
    """Pump load ``T_L = sign(w)*T_0 + k_pump*w*|w|`` with breakaway at rest."""
    T_0: float = 0.2
    k_pump: float = 1.377e-3

    def __post_init__(self):
        check(self.T_0 >= 0, "load.T_0", "N*m", self.T_0, ">= 0")
        check(self.k_pump >= 0, "load.k_pump", "N*m*s^2/rad^2", self.k_pump, ">= 0")


@dataclass(frozen=True)
class PlantState:
    """Plant state; alpha-beta quantities are ``(alpha, beta)`` tuples."""
    theta_e: float = 0.0
    omega_m: float = 0.0
    i_motor: tuple = (0.0, 0.0)
    v_Co: tuple = (0.0, 0.0)
    i_cable: tuple = (0.0, 0.0)
    v_Cc: tuple = (0.0, 0.0)
    i_dc: float = 0.0

    def to_array(self):
        return np.array([self.theta_e, self.omega_m, *self.i_motor, *self.v_Co,
                         *self.i_cable, *self.v_Cc, self.i_dc], dtype=np.float64)

    @classmethod
    def from_array(cls, x):
        x = [float(v) for v in x]
        return cls(x[0], x[1], (x[2], x[3]), (x[4], x[5]), (x[6], x[7]),
                   (x[8], x[9]), x[10])


def pack_params(p, cable, fe, load):
    """Flatten the parameter groups into the array read by the kernels."""
    return np.array([
        p.R_s, p.L_s, p.k_e, p.pole_pairs, p.J, p.B_visc, load.T_0,
        load.k_pump, cable.R_c, cable.L_c, cable.C_c, fe.C_o, fe.tau_dc,
        1.0 if cable.topology == "SeriesRLShuntC" else 0.0], dtype=np.float64)


# %%
def back_emf(theta_e, omega_m, p):
    """Back-EMF ``(e_alpha, e_beta)`` in volts."""
    k = p.k_e * omega_m
    return -k * math.sin(theta_e), k * math.cos(theta_e)


def electromagnetic_torque(state, p):
    """Electromagnetic torque (N·m); finite at standstill by construction."""
    i_a, i_b = state.i_motor
    th = state.theta_e
    return p.k_e * (-i_a * math.sin(th) + i_b * math.cos(th))


def load_torque(omega_m, load, applied=0.0):
    """
    Load torque opposing motion (N·m).

    At standstill the constant term acts as breakaway friction: it cancels
    `applied` torque up to ``±T_0``.

    """
    if omega_m > 0.0:
        return load.T_0 + load.k_pump * omega_m * omega_m
    if omega_m < 0.0:
        return -load.T_0 - load.k_pump * omega_m * omega_m
    return min(max(applied, -load.T_0), load.T_0)


@njit(cache=True)
def _rhs(x, u, prm):
    # u = (i_inv_alpha, i_inv_beta, i_dc_ref)
    R_s, L_s, k_e, P, J, B = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5]
    T_0, k_pump = prm[6], prm[7]
    R_c, L_c, C_c, C_o, tau_dc = prm[8], prm[9], prm[10], prm[11], prm[12]
    cabled = prm[13] > 0.5

    th = x[0]
    w = x[1]
    s = math.sin(th)
    c = math.cos(th)
    e_a = -k_e * w * s
    e_b = k_e * w * c
    i_a = x[2]
    i_b = x[3]

    dx = np.empty(11)
    if cabled:
        v_ta = x[8]
        v_tb = x[9]
        dx[6] = (x[4] - R_c * x[6] - x[8]) / L_c
        dx[7] = (x[5] - R_c * x[7] - x[9]) / L_c
        dx[8] = (x[6] - i_a) / C_c
        dx[9] = (x[7] - i_b) / C_c
        dx[4] = (u[0] - x[6]) / C_o
        dx[5] = (u[1] - x[7]) / C_o
    else:
        v_ta = x[4]
        v_tb = x[5]
        dx[4] = (u[0] - i_a) / C_o
        dx[5] = (u[1] - i_b) / C_o
        dx[8] = 0.0
        dx[9] = 0.0
    dx[2] = (-R_s * i_a - e_a + v_ta) / L_s
    dx[3] = (-R_s * i_b - e_b + v_tb) / L_s
    if not cabled:
        dx[6] = dx[2]
        dx[7] = dx[3]

    T_e = k_e * (-i_a * s + i_b * c)
    if w > 0.0:
        dx[1] = (T_e - T_0 - k_pump * w * w - B * w) / J
    elif w < 0.0:
        dx[1] = (T_e + T_0 + k_pump * w * w - B * w) / J
    elif abs(T_e) <= T_0:
        dx[1] = 0.0
    elif T_e > 0.0:
        dx[1] = (T_e - T_0) / J
    else:
        dx[1] = (T_e + T_0) / J
    dx[0] = P * w
    dx[10] = (u[2] - x[10]) / tau_dc
    return dx


def plant_derivatives(state, i_inv_ab, load, p, cable, fe, i_dc_ref=None):
    """
    Time derivative of the plant state.

    Parameters
    ----------
    state : PlantState
        Current state.
    i_inv_ab : tuple of float
        Injected inverter current (A), already limited to ``|i| <= i_dc``.
    load : LoadModel
    p : MotorParams
    cable : CableParams
    fe : DriveFrontEnd
    i_dc_ref : float, optional
        DC-link current reference (A). Defaults to `fe.i_dc_rated`.

    Returns
    -------
    PlantState
        Derivative, packed in the same structure as the state.

    """
    x = state.to_array()
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise NumericBlowupError(STATE_NAMES[bad[0]])
    if i_dc_ref is None:
        i_dc_ref = fe.i_dc_rated
    u = np.array([i_inv_ab[0], i_inv_ab[1], i_dc_ref], dtype=np.float64)
    return PlantState.from_array(_rhs(x, u, pack_params(p, cable, fe, load)))


def stored_energy(state, p, cable, fe):
    """Energy stored in inductors, capacitors and rotor inertia (J)."""
    def sq(v):
        return v[0] * v[0] + v[1] * v[1]
    E = 0.5 * p.L_s * sq(state.i_motor) + 0.5 * fe.C_o * sq(state.v_Co)
    if cable.topology == "SeriesRLShuntC":
        E += 0.5 * cable.L_c * sq(state.i_cable) + 0.5 * cable.C_c * sq(state.v_Cc)
    return E + 0.5 * p.J * state.omega_m ** 2


def power_terms(state, i_inv_ab, load, p, cable, fe):
    """
    Instantaneous power flows (W) used for energy-balance checks.

    Returns a dict with ``injected`` and the dissipated terms ``R_s``,
    ``R_c``, ``B`` and ``load``.

    """
    i_m = state.i_motor
    i_c = state.i_cable if cable.topology == "SeriesRLShuntC" else i_m
    w = state.omega_m
    T_e = electromagnetic_torque(state, p)
    return {
        "injected": state.v_Co[0] * i_inv_ab[0] + state.v_Co[1] * i_inv_ab[1],
        "R_s": p.R_s * (i_m[0] ** 2 + i_m[1] ** 2),
        "R_c": (cable.R_c * (i_c[0] ** 2 + i_c[1] ** 2)
                if cable.topology == "SeriesRLShuntC" else 0.0),
        "B": p.B_visc * w * w,
        "load": load_torque(w, load, T_e) * w,
    }


def motor_terminal_voltage(state, cable):
    """Voltage at the motor terminals (V), alpha-beta."""
    return state.v_Cc if cable.topology == "SeriesRLShuntC" else state.v_Co

"""
Scenario definition and JSON scenario files.

A scenario file is a JSON object with one section per parameter group.
Every section and every key is optional; omitted entries take the shipped
defaults (reference machine, cable and front-end data plus the documented
controller settings). Unknown keys are errors.
"""
import dataclasses
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from csidrive.controller import (IfStartupParams, PiGains, TransitionConfig,
                                 default_current_gains, default_speed_gains)
from csidrive.errors import ParameterError, check
from csidrive.estimator import ObserverParams, PllParams
from csidrive.plant import CableParams, DriveFrontEnd, LoadModel, MotorParams

DEFAULT_SCENARIO = Path(__file__).with_name("data") / "default_scenario.json"

INTEGRATORS = ("Euler", "RK4")
FEEDBACK_MODES = ("CommandVoltage", "PlantVoltage")


@dataclass(frozen=True)
class SimConfig:
    """Step sizes, run length, measurement imperfections and seeding."""
    dt_plant: float = 1e-5
    dt_ctrl: float = 2e-4
    t_end: float = 5.0
    integrator: str = "RK4"
    delay_cycles: int = 0
    noise_enabled: bool = False
    current_noise_std: float = 0.0
    rng_seed: int = 0
    feedback_mode: str = "CommandVoltage"
    randomize_initial_angle: bool = False
    stop_on_fault: bool = False

    def __post_init__(self):
        check(self.dt_plant > 0, "sim.dt_plant", "s", self.dt_plant, "> 0")
        check(self.dt_ctrl > 0, "sim.dt_ctrl", "s", self.dt_ctrl, "> 0")
        ratio = self.dt_ctrl / self.dt_plant
        check(abs(ratio - round(ratio)) < 1e-9 * ratio and round(ratio) >= 1,
              "sim.dt_ctrl", "s", self.dt_ctrl,
              f"an integer multiple of dt_plant ({self.dt_plant})")
        check(self.t_end > 0, "sim.t_end", "s", self.t_end, "> 0")
        check(self.integrator in INTEGRATORS, "sim.integrator", "-", self.integrator,
              f"one of {INTEGRATORS}")
        check(_is_int(self.delay_cycles) and self.delay_cycles >= 0,
              "sim.delay_cycles", "cycles", self.delay_cycles, "an integer >= 0")
        check(self.current_noise_std >= 0, "sim.current_noise_std", "A",
              self.current_noise_std, ">= 0")
        check(_is_int(self.rng_seed), "sim.rng_seed", "-", self.rng_seed, "an integer")
        check(self.feedback_mode in FEEDBACK_MODES, "sim.feedback_mode", "-",
              self.feedback_mode, f"one of {FEEDBACK_MODES}")

    @property
    def substeps(self):
        return int(round(self.dt_ctrl / self.dt_plant))

    @property
    def n_cycles(self):
        return int(round(self.t_end / self.dt_ctrl))


@dataclass(frozen=True)
class MetricsConfig:
    """Windows and thresholds used by :func:`csidrive.metrics.compute_metrics`."""
    t3_window: float = 1.0
    t2_window: float = 0.05
    dq_threshold: float = 0.1
    settle_band_deg: float = 2.0

    def __post_init__(self):
        check(self.t3_window > 0, "metrics.t3_window", "s", self.t3_window, "> 0")
        check(self.t2_window > 0, "metrics.t2_window", "s", self.t2_window, "> 0")
        check(self.dq_threshold > 0, "metrics.dq_threshold", "A", self.dq_threshold, "> 0")
        check(self.settle_band_deg > 0, "metrics.settle_band_deg", "deg",
              self.settle_band_deg, "> 0")


@dataclass(frozen=True)
class ControllerMotorOverride:
    """Controller-side machine parameters; ``None`` means "same as the plant"."""
    R_s: float = None
    L_s: float = None

    def __post_init__(self):
        if self.R_s is not None:
            check(self.R_s > 0, "controller_motor.R_s", "ohm", self.R_s, "> 0")
        if self.L_s is not None:
            check(self.L_s > 0, "controller_motor.L_s", "H", self.L_s, "> 0")


@dataclass(frozen=True)
class Scenario:
    motor: MotorParams = field(default_factory=MotorParams)
    controller_motor: ControllerMotorOverride = field(default_factory=ControllerMotorOverride)
    cable: CableParams = field(default_factory=CableParams)
    front_end: DriveFrontEnd = field(default_factory=DriveFrontEnd)
    load: LoadModel = field(default_factory=LoadModel)
    startup: IfStartupParams = field(default_factory=IfStartupParams)
    current_pi: PiGains = None
    speed_pi: PiGains = None
    observer: ObserverParams = field(default_factory=ObserverParams)
    pll: PllParams = field(default_factory=PllParams)
    transition: TransitionConfig = field(default_factory=TransitionConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    initial_rotor_angle: float = 0.0

    def __post_init__(self):
        # PI defaults depend on the machine, so they are resolved here.
        if self.current_pi is None:
            object.__setattr__(self, "current_pi", default_current_gains(self.line_model))
        if self.speed_pi is None:
            object.__setattr__(self, "speed_pi", default_speed_gains(self.motor))
        if self.transition.hc_r_comp is None:
            object.__setattr__(self, "transition",
                               replace(self.transition, hc_r_comp=self.line_model.R_s))
        check(math.isfinite(self.initial_rotor_angle), "initial_rotor_angle", "rad",
              self.initial_rotor_angle, "finite")

    @property
    def control_motor(self):
        """Machine parameters as known to the controller and observer."""
        over = {k: v for k, v in dataclasses.asdict(self.controller_motor).items()
                if v is not None}
        return replace(self.motor, **over) if over else self.motor

    @property
    def line_model(self):
        """
        Series impedance seen from the drive output, as used by the controller.

        The controller-side machine plus the series cable branch; the shunt
        capacitance is neglected.
        """
        m = self.control_motor
        if self.cable.topology != "SeriesRLShuntC":
            return m
        return replace(m, R_s=m.R_s + self.cable.R_c, L_s=m.L_s + self.cable.L_c)


GROUPS = {
    "motor": MotorParams,
    "controller_motor": ControllerMotorOverride,
    "cable": CableParams,
    "front_end": DriveFrontEnd,
    "load": LoadModel,
    "startup": IfStartupParams,
    "current_pi": PiGains,
    "speed_pi": PiGains,
    "observer": ObserverParams,
    "pll": PllParams,
    "transition": TransitionConfig,
    "sim": SimConfig,
    "metrics": MetricsConfig,
}

UNITS = {
    "motor": {"R_s": "ohm", "L_s": "H", "psi_f": "Wb", "pole_pairs": "-",
              "J": "kg*m^2", "B_visc": "N*m*s/rad"},
    "controller_motor": {"R_s": "ohm", "L_s": "H"},
    "cable": {"R_c": "ohm", "L_c": "H", "C_c": "F", "topology": "-"},
    "front_end": {"C_o": "F", "i_dc_rated": "A", "tau_dc": "s", "tau_v": "s",
                  "L_dc": "H", "V_g": "V", "f_g": "Hz"},
    "load": {"T_0": "N*m", "k_pump": "N*m*s^2/rad^2"},
    "startup": {"K_omega": "rad/s^2", "i_q_star": "A", "i_d_star": "A",
                "omega_target": "rad/s", "initial_lag": "rad"},
    "current_pi": {"kp": "V/A", "ki": "V/(A*s)", "output_min": "V", "output_max": "V"},
    "speed_pi": {"kp": "A*s/rad", "ki": "A/rad", "output_min": "A", "output_max": "A"},
    "observer": {"g_obs": "1/s", "emf_filter_cutoff": "rad/s", "rotating_model": "-"},
    "pll": {"kp_pll": "rad/s", "ki_pll": "rad/s^2", "omega_hat_limit": "rad/s",
            "emf_floor": "V", "lock_emf_min": "V", "lock_eps_rms_max": "-",
            "lock_window": "cycles", "omega_filter_cutoff": "rad/s"},
    "transition": {"mode": "-", "t_align": "s", "t_to_T2": "s", "t_to_T3": "s",
                   "align_ramp_rate": "rad/s", "align_tol": "rad", "align_dwell": "s",
                   "t2_dwell": "s", "settle_dwell": "s", "hc_dtheta": "rad",
                   "hc_h": "cycles", "hc_stop_band": "rad",
                   "hc_r_comp": "ohm"},
    "sim": {"dt_plant": "s", "dt_ctrl": "s", "t_end": "s", "integrator": "-",
            "delay_cycles": "cycles", "noise_enabled": "-", "current_noise_std": "A",
            "rng_seed": "-", "feedback_mode": "-", "randomize_initial_angle": "-",
            "stop_on_fault": "-"},
    "metrics": {"t3_window": "s", "t2_window": "s", "dq_threshold": "A",
                "settle_band_deg": "deg"},
}


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _coerce(group, key, value, default):
    """Type-check one JSON value against the dataclass default's kind."""
    name = f"{group}.{key}"
    unit = UNITS[group][key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ParameterError(name, unit, f"{name} must be true/false, got {value!r}")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ParameterError(name, unit, f"{name} must be a string, got {value!r}")
        return value
    if _is_int(default) and key in ("pole_pairs", "lock_window", "hc_h",
                                    "delay_cycles", "rng_seed"):
        if not _is_int(value):
            raise ParameterError(name, unit,
                                 f"{name} must be an integer [{unit}], got {value!r}")
        return int(value)
    if value is None and default is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParameterError(name, unit, f"{name} must be a number [{unit}], got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(name, unit, f"{name} must be finite [{unit}], got {value!r}")
    return value


def _build_group(group, section, base):
    cls = GROUPS[group]
    if not isinstance(section, dict):
        raise ParameterError(group, "-", f"section '{group}' must be a JSON object")
    names = [f.name for f in dataclasses.fields(cls)]
    for key in section:
        if key not in names:
            raise ParameterError(f"{group}.{key}", "-",
                                 f"unknown key '{group}.{key}'; expected one of {names}")
    values = dataclasses.asdict(base)
    for key, value in section.items():
        values[key] = _coerce(group, key, value, values[key])
    return cls(**values)


def scenario_from_dict(doc):
    """
    Build a validated :class:`Scenario` from a parsed JSON document.

    Raises
    ------
    ParameterError
        On unknown keys, wrong types or out-of-range values; the message names
        the key and its unit.

    """
    if not isinstance(doc, dict):
        raise ParameterError("", "-", "scenario document must be a JSON object")
    allowed = set(GROUPS) | {"initial_rotor_angle", "description"}
    for key in doc:
        if key not in allowed:
            raise ParameterError(key, "-", f"unknown section '{key}'; expected one of "
                                 f"{sorted(allowed)}")
    kwargs = {}
    pi_groups = ("current_pi", "speed_pi")
    for group in GROUPS:
        if group in doc and group not in pi_groups:
            kwargs[group] = _build_group(group, doc[group], GROUPS[group]())
    # PI defaults depend on the machine and cable, so partial PI sections are
    # merged over the gains resolved for this particular drive.
    provisional = Scenario(**kwargs)
    for group in pi_groups:
        if group in doc:
            kwargs[group] = _build_group(group, doc[group], getattr(provisional, group))
    if "initial_rotor_angle" in doc:
        v = doc["initial_rotor_angle"]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParameterError("initial_rotor_angle", "rad",
                                 f"initial_rotor_angle must be a number [rad], got {v!r}")
        kwargs["initial_rotor_angle"] = float(v)
    return Scenario(**kwargs)


def parse_scenario(path=None):
    """
    Read and validate a scenario file.

    Parameters
    ----------
    path : str or Path, optional
        JSON file. ``None`` loads the shipped default scenario.

    """
    path = DEFAULT_SCENARIO if path is None else Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ParameterError("", "-", f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(doc)


def scenario_to_dict(sc):
    """Every effective parameter, in the layout accepted by :func:`scenario_from_dict`."""
    doc = {group: dataclasses.asdict(getattr(sc, group)) for group in GROUPS}
    doc["initial_rotor_angle"] = sc.initial_rotor_angle
    return doc


def set_parameter(sc, path, value):
    """
    Return a copy of `sc` with the dotted parameter `path` set to `value`.

    The change goes through the same validation as a scenario file.
    """
    doc = scenario_to_dict(sc)
    parts = path.split(".")
    if len(parts) == 1 and parts[0] == "initial_rotor_angle":
        doc["initial_rotor_angle"] = value
    elif len(parts) == 2 and parts[0] in GROUPS and parts[1] in doc[parts[0]]:
        doc[parts[0]][parts[1]] = value
    else:
        raise ParameterError(path, "-", f"unknown parameter path '{path}'")
    return scenario_from_dict(doc)

"""Sensorless startup simulator for a cable-connected, CSI-fed PMSM drive."""
from csidrive.controller import Terminal, TransitionConfig, IfStartupParams, PiGains
from csidrive.engine import TRACE_COLUMNS, StallWarning, Trace, run_scenario, simulate
from csidrive.errors import NumericBlowupError, ParameterError
from csidrive.estimator import ObserverParams, PllParams
from csidrive.metrics import Metrics, compute_metrics
from csidrive.outputs import read_trace_csv, write_outputs
from csidrive.plant import CableParams, DriveFrontEnd, LoadModel, MotorParams
from csidrive.scenario import (MetricsConfig, Scenario, SimConfig, parse_scenario,
                               scenario_from_dict, scenario_to_dict, set_parameter)

__version__ = "0.1.0"

__all__ = [
    "CableParams", "DriveFrontEnd", "IfStartupParams", "LoadModel", "Metrics",
    "MetricsConfig", "MotorParams", "NumericBlowupError", "ObserverParams",
    "ParameterError", "PiGains", "PllParams", "Scenario", "SimConfig", "StallWarning",
    "TRACE_COLUMNS", "Terminal", "Trace", "TransitionConfig", "compute_metrics",
    "parse_scenario", "read_trace_csv", "run_scenario", "scenario_from_dict",
    "scenario_to_dict", "set_parameter", "simulate", "write_outputs",
]

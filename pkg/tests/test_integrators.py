import math

import numpy as np
import pytest

from csidrive.errors import NumericBlowupError
from csidrive.integrators import EULER, RK4, integrate_step


def _exp_error(dt, method=RK4):
    x = np.array([1.0])
    for _ in range(int(round(1.0 / dt))):
        x = integrate_step(x, lambda y: -y, dt, method)
    return abs(x[0] - math.exp(-1.0))


def test_rk4_exponential():
    x = np.array([1.0])
    for _ in range(100):
        x = integrate_step(x, lambda y: -y, 0.01)
    assert abs(x[0] - math.exp(-1.0)) <= 1e-9


def test_rk4_order_exponent():
    dts = [0.1, 0.05, 0.025, 0.0125]
    errs = [_exp_error(h) for h in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert 3.5 <= slope <= 4.5


def test_euler_is_first_order():
    dts = [0.01, 0.005, 0.0025]
    errs = [_exp_error(h, EULER) for h in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert 0.9 <= slope <= 1.1


def test_harmonic_oscillator_energy_drift():
    def f(y):
        return np.array([y[1], -y[0]])
    y = np.array([1.0, 0.0])
    for _ in range(10000):
        y = integrate_step(y, f, 0.01)
    E = 0.5 * (y[0] ** 2 + y[1] ** 2)
    assert abs(E - 0.5) / 0.5 <= 1e-8


def test_zero_derivative_is_identity():
    x = np.array([1.5, -2.0, 3.25])
    for method in (EULER, RK4):
        assert np.array_equal(integrate_step(x, np.zeros_like, 1e-3, method), x)


def test_blowup_reports_time():
    with pytest.raises(NumericBlowupError) as ei:
        integrate_step(np.array([1.0]), lambda y: y * np.inf, 1e-3, RK4, t=0.25)
    assert ei.value.t == 0.25


def test_bad_arguments():
    with pytest.raises(ValueError):
        integrate_step(np.array([1.0]), lambda y: y, 0.0)
    with pytest.raises(ValueError):
        integrate_step(np.array([1.0]), lambda y: y, 1e-3, "Midpoint")

"""Exception types shared across the simulator."""


class ParameterError(ValueError):
    """A parameter or scenario entry violates its documented range.

    Parameters
    ----------
    key : str
        Dotted name of the offending entry, e.g. ``"motor.L_s"``.
    unit : str
        Unit the entry is expressed in.
    message : str
        Human readable explanation.
    """

    def __init__(self, key, unit, message):
        super().__init__(message)
        self.key = key
        self.unit = unit


class NumericBlowupError(ArithmeticError):
    """A state or derivative became non-finite."""

    def __init__(self, component, t=None):
        where = f" at t={t:.6g} s" if t is not None else ""
        super().__init__(f"non-finite value in {component}{where}")
        self.component = component
        self.t = t


def check(cond, key, unit, value, rule):
    """Raise :class:`ParameterError` unless `cond` holds."""
    if not cond:
        raise ParameterError(key, unit, f"{key} must be {rule} [{unit}], got {value!r}")

"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Bad input data, parameters, or configuration."""


class FitError(RuntimeError):
    """Parameter identification failed (no excitation, singular bin, ...)."""


class LimitViolation(RuntimeError):
    """An operational limit was exceeded.

    Carries the limit kind (e.g. ``"current"``, ``"voltage_low"``,
    ``"temperature"``, ``"soc_floor"``, ``"motor_power"``, ``"mass"``),
    the offending value, the limit itself, and optionally the simulation
    time at which it occurred.
    """

    def __init__(self, kind: str, value: float, limit: float, t: float | None = None):
        self.kind = kind
        self.value = value
        self.limit = limit
        self.t = t
        self.magnitude = abs(value - limit)
        when = "" if t is None else f" at t={t:.1f} s"
        super().__init__(
            f"{kind} limit violated{when}: value {value:.6g} vs limit {limit:.6g}"
        )


class EfficiencyTableClampWarning(UserWarning):
    """A lookup argument fell outside the table domain and was clamped."""


class LaminarRangeWarning(UserWarning):
    """Flow is outside the strictly laminar regime the correlation assumes."""

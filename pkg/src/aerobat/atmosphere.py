"""Air density, flight profiles, and profile-derived kinematics.

A mission is an exogenous airspeed/altitude trajectory on a uniform time
grid; the pilot is assumed to fly it exactly.  Acceleration and flight path
angle are recovered from the sampled trajectory by finite differences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

RHO_SEA_LEVEL = 1.225       # kg/m^3
TROPOSPHERE_TOP_M = 11000.0
_ISA_COEFF = 2.25577e-5     # 1/m
_ISA_EXPONENT = 4.25588

PROFILE_HEADER = ("t_s", "v_mps", "h_m")


def air_density(h: float) -> float:
    """ISA troposphere air density [kg/m^3] at geometric altitude h [m]."""
    if not 0.0 <= h <= TROPOSPHERE_TOP_M:
        raise ValidationError(
            f"altitude {h!r} m outside troposphere range [0, {TROPOSPHERE_TOP_M:.0f}] m"
        )
    return RHO_SEA_LEVEL * (1.0 - _ISA_COEFF * h) ** _ISA_EXPONENT


@dataclass(frozen=True)
class FlightProfile:
    """Mission trajectory sampled on a uniform time grid.

    t : time [s], strictly increasing with constant step
    v : airspeed [m/s], >= 0
    h : altitude [m], >= 0
    """

    t: np.ndarray
    v: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        t, v, h = (np.asarray(a, dtype=float) for a in (self.t, self.v, self.h))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "h", h)
        if t.size < 2:
            raise ValidationError("flight profile needs at least 2 samples")
        if not (t.size == v.size == h.size):
            raise ValidationError("t, v, h must have equal length")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise ValidationError("profile time grid must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-9):
            raise ValidationError("profile time grid must have a constant step")
        if np.any(v < 0):
            raise ValidationError("airspeed must be non-negative everywhere")
        if np.any(h < 0):
            raise ValidationError("altitude must be non-negative everywhere")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def __len__(self) -> int:
        return int(self.t.size)


@dataclass(frozen=True)
class DerivedKinematics:
    """Finite-difference acceleration [m/s^2] and flight path angle [rad]."""

    vdot: np.ndarray
    gamma: np.ndarray


def make_cruise_profile(
    duration: float, altitude: float, speed: float, dt: float = 1.0
) -> FlightProfile:
    """Constant-altitude, constant-speed profile covering ``duration`` seconds."""
    if duration <= 0 or dt <= 0:
        raise ValidationError("duration and dt must be positive")
    if altitude < 0 or speed < 0:
        raise ValidationError("altitude and speed must be non-negative")
    n = int(round(duration / dt)) + 1
    t = np.arange(n) * dt
    return FlightProfile(t=t, v=np.full(n, float(speed)), h=np.full(n, float(altitude)))


def derive_kinematics(
    profile: FlightProfile,
    gamma_bounds: tuple[float, float] | None = None,
) -> DerivedKinematics:
    """Recover v̇ and γ from the sampled trajectory.

    Central differences in the interior, one-sided at the ends.  The climb
    angle is asin(ḣ/v); samples with v = 0 and ḣ = 0 get γ = 0.  A sample
    with \\|ḣ\\| > v is unphysical and rejected.  When ``gamma_bounds``
    (min, max) [rad] are supplied, any γ outside them is a validation error.
    """
    dt = profile.dt
    vdot = np.gradient(profile.v, dt)
    hdot = np.gradient(profile.h, dt)

    bad = np.abs(hdot) > profile.v + 1e-12
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValidationError(
            f"climb rate exceeds airspeed at sample {i}: |hdot|={abs(hdot[i]):.4g} "
            f"> v={profile.v[i]:.4g}"
        )

    gamma = np.zeros_like(hdot)
    moving = profile.v > 0
    ratio = np.clip(hdot[moving] / profile.v[moving], -1.0, 1.0)
    gamma[moving] = np.arcsin(ratio)

    if gamma_bounds is not None:
        lo, hi = gamma_bounds
        if np.any(gamma < lo - 1e-12) or np.any(gamma > hi + 1e-12):
            i = int(np.argmax((gamma < lo - 1e-12) | (gamma > hi + 1e-12)))
            raise ValidationError(
                f"flight path angle {gamma[i]:.4f} rad at sample {i} outside "
                f"[{lo:.4f}, {hi:.4f}] rad"
            )
    return DerivedKinematics(vdot=vdot, gamma=gamma)


def load_profile_csv(path, dt: float = 1.0) -> FlightProfile:
    """Read a mission profile CSV (header ``t_s,v_mps[,h_m]``).

    A nonuniform time grid is resampled onto a uniform one with step ``dt``
    by linear interpolation.  A missing altitude column means sea level.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty profile file")
    header = [c.strip() for c in rows[0]]
    if header[:2] != ["t_s", "v_mps"] or (len(header) > 2 and header[2] != "h_m"):
        raise ValidationError(
            f"{path}: expected header 't_s,v_mps[,h_m]', got {','.join(header)}"
        )
    try:
        data = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"{path}: malformed numeric data ({exc})") from exc
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValidationError(f"{path}: need at least 2 profile samples")
    t, v = data[:, 0], data[:, 1]
    h = data[:, 2] if data.shape[1] > 2 else np.zeros_like(t)

    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ValidationError(f"{path}: time column must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-9):
        tu = np.arange(t[0], t[-1] + dt / 2, dt)
        v = np.interp(tu, t, v)
        h = np.interp(tu, t, h)
        t = tu
    return FlightProfile(t=t, v=v, h=h)

"""Thrust demand and the electrical power chain from propeller to DC bus.

Both motors and both inverters are lumped into one unit driven at constant
propeller speed.  The chain from kinematics to DC power is stateless:
thrust -> shaft power -> torque -> AC power (motor efficiency vs torque)
-> DC power (quadratic inverter loss).  Regeneration is not modeled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EfficiencyTableClampWarning, LimitViolation, ValidationError

G_STANDARD = 9.81  # m/s^2


@dataclass(frozen=True)
class AircraftParams:
    """Airframe constants for the longitudinal point-mass model."""

    m_empty: float            # kg, airframe without battery system and cooling
    m_max: float              # kg, maximum takeoff mass
    s_w: float                # m^2, wing area
    c_d: float                # -, drag coefficient
    c_l: float = 0.85         # -, lift coefficient (carried, unused by the model)
    alpha: float = 0.0        # rad, angle of attack
    alpha_max: float = math.radians(4.0)
    gamma_max: float = math.radians(8.0)
    gamma_min: float = math.radians(-1.0)
    g: float = G_STANDARD

    def __post_init__(self):
        if self.m_empty <= 0 or self.s_w <= 0:
            raise ValidationError("m_empty and s_w must be positive")
        if not 0.0 <= self.c_d <= 1.0:
            raise ValidationError("c_d must lie in [0, 1]")
        if abs(self.alpha) > self.alpha_max + 1e-12:
            raise ValidationError(
                f"|alpha|={abs(self.alpha):.4f} rad exceeds alpha_max="
                f"{self.alpha_max:.4f} rad"
            )


@dataclass(frozen=True)
class EtaTable:
    """Motor efficiency vs torque, linearly interpolated.

    Torque outside the table domain is clamped to the nearest endpoint and
    a warning is recorded; a hard failure here would abort a whole
    optimization run on one transient spike.
    """

    tau: np.ndarray   # N*m, strictly increasing
    eta: np.ndarray   # -, in (0, 1]

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "eta", eta)
        if tau.size != eta.size or tau.size < 2:
            raise ValidationError("efficiency table needs >= 2 aligned rows")
        if np.any(np.diff(tau) <= 0):
            raise ValidationError("efficiency table torque must be strictly increasing")
        if np.any((eta <= 0) | (eta > 1)):
            raise ValidationError("efficiency values must lie in (0, 1]")

    def __call__(self, tau: float) -> float:
        if tau < self.tau[0] or tau > self.tau[-1]:
            warnings.warn(
                f"torque {tau:.1f} N*m outside efficiency table "
                f"[{self.tau[0]:.1f}, {self.tau[-1]:.1f}]; clamped",
                EfficiencyTableClampWarning,
                stacklevel=2,
            )
        return float(np.interp(tau, self.tau, self.eta))


def flat_eta_table(eta: float = 0.95, tau_max: float = 5000.0) -> EtaTable:
    """Constant-efficiency placeholder used when no motor datasheet is given."""
    return EtaTable(tau=np.array([0.0, tau_max]), eta=np.array([eta, eta]))


@dataclass(frozen=True)
class PowertrainParams:
    """Lumped propeller + motor + inverter constants."""

    eta_p: float                      # -, propeller propulsion efficiency
    omega: float                      # rad/s, constant motor/propeller speed
    p_m_max: float                    # W, rated power of one motor
    n_m: int = 2                      # -, number of motors (lumped)
    beta: float = 1e-7                # 1/W, quadratic inverter loss coefficient
    p_aux: float = 0.0                # W, constant auxiliary load
    tau_m_max: float | None = None    # N*m for the lumped unit; derived if None
    eta_m: EtaTable = field(default_factory=flat_eta_table)

    def __post_init__(self):
        if not 0.0 < self.eta_p <= 1.0:
            raise ValidationError("eta_p must lie in (0, 1]")
        if self.omega <= 0:
            raise ValidationError("omega must be positive")
        if self.beta < 0:
            raise ValidationError("beta must be non-negative")
        if self.n_m < 1 or self.p_m_max <= 0:
            raise ValidationError("need n_m >= 1 and p_m_max > 0")
        if self.tau_m_max is None:
            object.__setattr__(
                self, "tau_m_max", self.n_m * self.p_m_max / self.omega
            )

    @property
    def p_installed(self) -> float:
        """W, installed motor power of the lumped unit."""
        return self.n_m * self.p_m_max


def thrust(
    rho: float, v: float, vdot: float, gamma: float, m: float, params: AircraftParams
) -> float:
    """Required thrust [N] from the longitudinal point-mass force balance."""
    if rho <= 0 or m <= 0 or v < 0:
        raise ValidationError("need rho > 0, m > 0, v >= 0")
    if abs(params.alpha) >= math.pi / 2:
        raise ValidationError("angle of attack must satisfy |alpha| < pi/2")
    drag = 0.5 * rho * v * v * params.c_d * params.s_w
    return (drag + m * (params.g * math.sin(gamma) + vdot)) / math.cos(params.alpha)


def total_mass(m_empty: float, m_b: float, m_btms: float, m_max: float | None = None) -> float:
    """Aircraft mass [kg] = airframe + battery system + cooling system."""
    if min(m_empty, m_b, m_btms) < 0:
        raise ValidationError("masses must be non-negative")
    m = m_empty + m_b + m_btms
    if m_max is not None and m > m_max:
        raise LimitViolation("mass", m, m_max)
    return m


def motor_power(f_t: float, v: float, eta_p: float, p_max: float = math.inf) -> float:
    """Shaft power demand [W] of the lumped motor unit."""
    if not 0.0 < eta_p <= 1.0:
        raise ValidationError("eta_p must lie in (0, 1]")
    p_m = f_t * v / eta_p
    if p_m > p_max:
        raise LimitViolation("motor_power", p_m, p_max)
    return p_m


def motor_torque(p_m: float, omega: float, tau_max: float = math.inf) -> float:
    """Motor torque [N*m] at constant rotational speed."""
    if omega <= 0:
        raise ValidationError("omega must be positive")
    tau = p_m / omega
    if tau > tau_max:
        raise LimitViolation("motor_torque", tau, tau_max)
    return tau


def ac_power(p_m: float, tau: float, eta_m: EtaTable) -> float:
    """Inverter output power [W] given the torque-dependent motor efficiency."""
    if p_m == 0.0:
        return 0.0
    return p_m / eta_m(tau)


def dc_power(p_ac: float, beta: float) -> float:
    """DC bus power [W] with a quadratic inverter switching-loss model."""
    if p_ac < 0:
        raise ValidationError("p_ac must be non-negative")
    return beta * p_ac * p_ac + p_ac


def load_eta_table_csv(path) -> EtaTable:
    """Read a motor efficiency table CSV with header ``tau_Nm,eta``."""
    rows = np.genfromtxt(path, delimiter=",", names=True, dtype=float, comments="#")
    names = rows.dtype.names
    if names is None or list(names) != ["tau_Nm", "eta"]:
        raise ValidationError(f"{path}: expected header 'tau_Nm,eta'")
    return EtaTable(tau=np.atleast_1d(rows["tau_Nm"]), eta=np.atleast_1d(rows["eta"]))

"""Single-global-reaction decomposition model and oven-ramp scenarios.

All exothermic decomposition paths are lumped into one Arrhenius reaction.
``x`` is the remaining reactant fraction, consumed as

    dx/dt = -A_x * x * exp(-E_A / (k_b * T)),  x(0) = 1

and releasing heat m_cell * i_react * |dx/dt|.  In an oven scenario the
ambient temperature ramps linearly while the cell exchanges heat by
convection and radiation; runaway "triggers" when the cell self-heats
faster than the oven ramp by more than a threshold rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .ecm import CellParams
from .errors import ValidationError
from .thermal import ThermalEnv, q_conv, q_rad

BOLTZMANN = 1.380649e-23          # J/K
DEFAULT_TRIGGER_RATE = 10.0 / 60.0  # K/s of self-heating above the ramp
_MAX_HALVINGS = 16                # adaptive step refinement depth


@dataclass(frozen=True)
class TrParams:
    """Global-reaction kinetics and enthalpy.

    ``source`` is a provenance label; outputs produced without measured
    kinetics are marked ``uncalibrated``.
    """

    i_react: float    # J/kg, specific reaction enthalpy
    a_x: float        # 1/s, frequency factor
    e_a: float        # J, activation energy (per-molecule, pairs with k_b)
    k_b: float = BOLTZMANN
    source: str = "uncalibrated"

    def __post_init__(self):
        if min(self.i_react, self.a_x, self.e_a, self.k_b) <= 0:
            raise ValidationError("reaction parameters must be positive")

    @property
    def theta(self) -> float:
        """K, activation temperature E_A / k_b."""
        return self.e_a / self.k_b


@dataclass(frozen=True)
class TrState:
    """Remaining reactant fraction and cell temperature [K]."""

    x_cell: float
    t_cell: float

    def __post_init__(self):
        if not 0.0 <= self.x_cell <= 1.0:
            raise ValidationError("conversion fraction must lie in [0, 1]")
        if self.t_cell <= 0:
            raise ValidationError("cell temperature must be positive (Kelvin)")


def conversion_rate(state: TrState, params: TrParams) -> float:
    """Reaction rate [1/s] at the current state."""
    return params.a_x * state.x_cell * math.exp(-params.theta / state.t_cell)


def step_conversion(state: TrState, rate: float, dt: float) -> TrState:
    """Consume reactant for one step, clamped at exhaustion."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    return replace(state, x_cell=max(0.0, state.x_cell - rate * dt))


def q_gen_tr(rate: float, m_cell: float, i_react: float) -> float:
    """Decomposition heat release [W] for a given reaction rate."""
    if rate < 0:
        raise ValidationError("rate must be non-negative")
    return m_cell * i_react * rate


def calibrate_tr_params(
    point1: tuple[float, float],
    point2: tuple[float, float],
    cell: CellParams,
    i_react: float,
) -> TrParams:
    """Fit (A_x, E_A) to two calorimeter points (T [K], dT/dt [K/s]).

    Under adiabatic self-heating with x ~ 1 the temperature rate is
    i_react * A_x * exp(-E_A/(k_b T)) / c_p, so two points fix both
    unknowns.  The enthalpy itself is not identifiable this way and must be
    supplied.
    """
    (t1, r1), (t2, r2) = point1, point2
    if min(t1, t2) <= 0 or min(r1, r2) <= 0:
        raise ValidationError("calibration points need positive T and dT/dt")
    if t1 == t2:
        raise ValidationError("calibration points must differ in temperature")
    if (t2 - t1) * (r2 - r1) <= 0:
        raise ValidationError("self-heating rate must increase with temperature")
    theta = math.log(r2 / r1) / (1.0 / t1 - 1.0 / t2)
    a_x = r1 * cell.c_p / i_react * math.exp(theta / t1)
    return TrParams(
        i_react=i_react, a_x=a_x, e_a=theta * BOLTZMANN, source="calibrated-2pt"
    )


@dataclass(frozen=True)
class OvenRampResult:
    """Time series of an oven-ramp scenario plus the detected trigger time."""

    t: np.ndarray          # s
    t_amb: np.ndarray      # K
    t_cell: np.ndarray     # K
    x_cell: np.ndarray     # -
    q_gen: np.ndarray      # W, step-average decomposition heat
    trigger_time: float | None
    heat_released: float   # J, total decomposition heat
    source: str


def _substep(state: TrState, t_amb: float, params: TrParams, cell: CellParams,
             env: ThermalEnv, dt: float, depth: int) -> tuple[TrState, float]:
    """One adaptive step; returns the new state and the heat released [J].

    Reactant decays in closed form with the rate constant frozen at the
    step-start temperature, which keeps x in [0, 1] and makes the released
    heat exactly m * i_react * dx however fast the reaction runs.  The
    temperature uses an explicit trapezoidal (Heun) update; steps that move
    the temperature more than 5 K are halved, up to a depth limit.
    """
    amb = replace(env, t_inf=t_amb)
    area = cell.surface_area
    cpm = cell.c_p * cell.m_cell

    k0 = params.a_x * math.exp(-params.theta / state.t_cell)
    dx = state.x_cell * -math.expm1(-k0 * dt)
    heat = cell.m_cell * params.i_react * dx
    q_gen_avg = heat / dt

    net0 = q_gen_avg - q_conv(state.t_cell, amb, area) - q_rad(state.t_cell, amb, area)
    t_pred = state.t_cell + dt * net0 / cpm
    if t_pred <= 0:
        t_pred = 1.0
    net1 = q_gen_avg - q_conv(t_pred, amb, area) - q_rad(t_pred, amb, area)
    dT = dt * 0.5 * (net0 + net1) / cpm

    if abs(dT) > 5.0 and depth < _MAX_HALVINGS:
        half = dt / 2.0
        mid, heat_a = _substep(state, t_amb, params, cell, env, half, depth + 1)
        new, heat_b = _substep(mid, t_amb, params, cell, env, half, depth + 1)
        return new, heat_a + heat_b

    new = TrState(x_cell=max(0.0, state.x_cell - dx), t_cell=state.t_cell + dT)
    return new, heat


def simulate_oven_ramp(
    params: TrParams,
    cell: CellParams,
    env: ThermalEnv,
    ramp: float,
    t_max: float,
    dt: float = 0.1,
    trigger_rate: float = DEFAULT_TRIGGER_RATE,
    t_amb_max: float | None = None,
) -> OvenRampResult:
    """Heat the ambient at ``ramp`` K/s and watch for self-sustained heating.

    The cell starts at the initial ambient ``env.t_inf`` and exchanges heat
    by convection and radiation.  The trigger time is the first instant the
    cell's heating rate exceeds the ambient ramp by ``trigger_rate``; None
    when that never happens before ``t_max``.  ``t_amb_max`` optionally
    clamps the oven temperature.
    """
    if ramp <= 0:
        raise ValidationError("ramp must be positive")
    if dt <= 0 or t_max <= dt:
        raise ValidationError("need 0 < dt < t_max")

    n = int(round(t_max / dt)) + 1
    t = np.arange(n) * dt
    t_amb = env.t_inf + ramp * t
    if t_amb_max is not None:
        t_amb = np.minimum(t_amb, t_amb_max)
    ramp_eff = np.diff(t_amb) / dt

    t_cell = np.empty(n)
    x_cell = np.empty(n)
    q_gen = np.zeros(n)
    state = TrState(x_cell=1.0, t_cell=env.t_inf)
    t_cell[0], x_cell[0] = state.t_cell, state.x_cell

    trigger = None
    heat_total = 0.0
    for k in range(n - 1):
        state, heat = _substep(state, float(t_amb[k]), params, cell, env, dt, 0)
        heat_total += heat
        t_cell[k + 1] = state.t_cell
        x_cell[k + 1] = state.x_cell
        q_gen[k + 1] = heat / dt
        if trigger is None:
            self_heating = (t_cell[k + 1] - t_cell[k]) / dt - ramp_eff[k]
            if self_heating > trigger_rate:
                trigger = float(t[k + 1])
    return OvenRampResult(
        t=t,
        t_amb=t_amb,
        t_cell=t_cell,
        x_cell=x_cell,
        q_gen=q_gen,
        trigger_time=trigger,
        heat_released=heat_total,
        source=params.source,
    )

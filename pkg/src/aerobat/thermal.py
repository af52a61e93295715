"""Lumped per-cell heat balance.

Every cell is a single thermal mass (the small Biot number justifies this):

    c_p * m * dT/dt = q_gen - q_diss

where generation follows the Bernardi split into irreversible overpotential
heat and reversible entropy heat, and dissipation collects natural
convection, radiation, and (when a cooling system is present) cold-plate
extraction.  Dissipation terms are positive when heat leaves the cell.
All temperatures are Kelvin internally; file and CLI I/O use Celsius.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .ecm import CellParams
from .errors import ValidationError

KELVIN_OFFSET = 273.15
STEFAN_BOLTZMANN = 5.67e-8  # W/(m^2*K^4)


def c_to_k(t_c: float) -> float:
    return t_c + KELVIN_OFFSET


def k_to_c(t_k: float) -> float:
    return t_k - KELVIN_OFFSET


@dataclass(frozen=True)
class ThermalEnv:
    """Ambient conditions around a cell."""

    t_inf: float               # K
    h_conv: float = 0.0        # W/(m^2*K)
    epsilon: float = 0.8       # -, surface emissivity
    sigma: float = STEFAN_BOLTZMANN

    def __post_init__(self):
        if self.t_inf <= 0:
            raise ValidationError("ambient temperature must be positive (Kelvin)")
        if self.h_conv < 0:
            raise ValidationError("h_conv must be non-negative")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError("emissivity must lie in [0, 1]")


@dataclass(frozen=True)
class CellThermalState:
    """Cell temperature [K]."""

    t_cell: float

    def __post_init__(self):
        if self.t_cell <= 0:
            raise ValidationError("cell temperature must be positive (Kelvin)")

    def in_optimal_range(self, cell: CellParams) -> bool:
        lo, hi = cell.t_opt_c
        return c_to_k(lo) <= self.t_cell <= c_to_k(hi)


def q_conv(t_cell: float, env: ThermalEnv, area: float) -> float:
    """Convective loss [W]; positive when the cell is hotter than ambient."""
    if area <= 0:
        raise ValidationError("area must be positive")
    return area * env.h_conv * (t_cell - env.t_inf)


def q_rad(t_cell: float, env: ThermalEnv, area: float) -> float:
    """Radiative loss [W] against the ambient enclosure."""
    if area <= 0:
        raise ValidationError("area must be positive")
    if t_cell <= 0:
        raise ValidationError("temperatures must be absolute (Kelvin)")
    return area * env.epsilon * env.sigma * (t_cell**4 - env.t_inf**4)


def q_irr(i_cell: float, u_oc: float, u_cell: float) -> float:
    """Irreversible overpotential heat [W]: I * (U_OC - U_cell)."""
    return i_cell * (u_oc - u_cell)


def q_rev(i_cell: float, t_cell: float, du_dt: float) -> float:
    """Reversible entropy heat [W]: I * T * dU_OC/dT."""
    if t_cell <= 0:
        raise ValidationError("cell temperature must be positive (Kelvin)")
    return i_cell * t_cell * du_dt


def step_temperature(
    state: CellThermalState, q_gen: float, q_diss: float, cell: CellParams, dt: float
) -> CellThermalState:
    """Advance the cell temperature one explicit step of the heat balance."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    return replace(
        state, t_cell=state.t_cell + dt * (q_gen - q_diss) / (cell.c_p * cell.m_cell)
    )


def explicit_stability_limit(cell: CellParams, ha_total: float) -> float:
    """Largest stable explicit time step [s] for total conductance hA [W/K]."""
    if ha_total <= 0:
        return float("inf")
    return cell.c_p * cell.m_cell / ha_total

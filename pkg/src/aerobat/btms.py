"""Active cooling loop: plate-duct convection, channel advection, sizing.

Chilled coolant from a vapor-cycle machine flows through plate ducts under
the cells.  The laminar duct correlation gives the film coefficient; the
coolant heats up as it passes cell after cell, so downstream cells see
warmer fluid and extract less heat.  Electrical draw is extracted heat
divided by the machine's coefficient of performance.

Unit note: the coolant conductivity presets are 0.6 W/(m*K) for water and
0.03 W/(m*K) for air (physical values; some data sheets quote these in
mW/(m*K) as 600 and 30).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import LaminarRangeWarning, ValidationError

NU_ONE_WALL = 4.816            # laminar plate duct, one heat-exchanging wall
RE_CORRELATION_MAX = 1e4
RE_LAMINAR_MAX = 2300.0


@dataclass(frozen=True)
class FluidProps:
    """Coolant properties (constant, evaluated at loop temperature)."""

    nu: float        # m^2/s, kinematic viscosity
    k_fl: float      # W/(m*K), thermal conductivity
    rho: float       # kg/m^3
    cp: float        # J/(kg*K)
    pr: float        # -, Prandtl number
    vdot_max: float  # m^3/s, maximum total flow the loop supports
    name: str = "custom"

    def __post_init__(self):
        if min(self.nu, self.k_fl, self.rho, self.cp, self.vdot_max) <= 0:
            raise ValidationError("fluid properties must be positive")
        if self.pr <= 0.6:
            raise ValidationError(
                f"Prandtl number {self.pr} <= 0.6 is outside the correlation's validity"
            )


WATER = FluidProps(
    nu=1.002e-6, k_fl=0.6, rho=1000.0, cp=4182.0, pr=6.9, vdot_max=0.0045, name="water"
)
AIR = FluidProps(
    nu=1.48e-5, k_fl=0.03, rho=1.292, cp=1006.0, pr=0.71, vdot_max=0.0625, name="air"
)

FLUID_PRESETS = {"water": WATER, "air": AIR}


@dataclass(frozen=True)
class ChannelGeometry:
    """Plate-duct cooling channel under a row of cells.

    The duct is two plates a distance ``s_ch`` apart (hydraulic diameter
    2*s_ch) and ``w_ch`` wide; each of the ``n_cells_per_channel`` cells
    contacts the plate over ``a_btms_cell``.
    """

    s_ch: float                 # m, plate spacing
    w_ch: float                 # m, duct breadth
    length: float               # m, channel length
    a_btms_cell: float          # m^2, contact area per cell
    n_cells_per_channel: int
    s_t: float | None = None    # m, transverse pitch (optional)
    s_l: float | None = None    # m, longitudinal pitch (optional)

    def __post_init__(self):
        if min(self.s_ch, self.w_ch, self.length, self.a_btms_cell) <= 0:
            raise ValidationError("channel dimensions must be positive")
        if self.n_cells_per_channel < 1:
            raise ValidationError("need at least one cell per channel")
        if self.s_t is not None:
            a = self.s_t / self.d_h
            if a >= 1.2:
                raise ValidationError(f"transverse pitch ratio {a:.3g} must be < 1.2")
            if self.s_l is not None and self.s_l / self.s_t >= 1.0:
                raise ValidationError("longitudinal/transverse pitch ratio must be < 1.0")

    @property
    def d_h(self) -> float:
        """m, hydraulic diameter of the plate duct."""
        return 2.0 * self.s_ch

    @property
    def a_cross(self) -> float:
        """m^2, duct cross-section."""
        return self.s_ch * self.w_ch


@dataclass(frozen=True)
class BtmsDesign:
    """Cooling-system design vector plus machine constants.

    ``p_rated`` is the rated *cooling* power; electrical draw is cooling
    power divided by ``k_btms``.
    """

    t_fl: float        # K, coolant inlet temperature
    vdot_fl: float     # m^3/s, total volumetric flow (divides over channels)
    p_rated: float     # W, rated cooling power
    k_btms: float = 3.0    # -, coefficient of performance
    rho_p: float = 100.0   # W/kg, cooling power density of the machine
    m_loop: float = 0.0    # kg, coolant loop mass

    def __post_init__(self):
        if self.t_fl <= 0:
            raise ValidationError("coolant temperature must be positive (Kelvin)")
        if self.vdot_fl < 0 or self.p_rated < 0:
            raise ValidationError("flow rate and rated power must be non-negative")
        if self.k_btms <= 0 or self.rho_p <= 0:
            raise ValidationError("k_btms and rho_p must be positive")
        if self.m_loop < 0:
            raise ValidationError("loop mass must be non-negative")


def fluid_velocity(vdot: float, geom: ChannelGeometry) -> float:
    """Mean duct velocity [m/s] for a single channel's flow rate."""
    if vdot < 0:
        raise ValidationError("flow rate must be non-negative")
    return vdot / geom.a_cross


def reynolds(v: float, geom: ChannelGeometry, fluid: FluidProps) -> float:
    """Duct Reynolds number; the correlation requires Re < 1e4."""
    if v < 0:
        raise ValidationError("velocity must be non-negative")
    re = geom.d_h * v / fluid.nu
    if re >= RE_CORRELATION_MAX:
        raise ValidationError(
            f"Re = {re:.0f} >= {RE_CORRELATION_MAX:.0f}: outside the correlation's validity"
        )
    if re > RE_LAMINAR_MAX:
        warnings.warn(
            f"Re = {re:.0f} exceeds the laminar limit {RE_LAMINAR_MAX:.0f}",
            LaminarRangeWarning,
            stacklevel=2,
        )
    return re


def nusselt(re: float, pr: float, geom: ChannelGeometry) -> float:
    """Mean laminar plate-duct Nusselt number with entrance-length term."""
    if pr <= 0.6:
        raise ValidationError(f"Pr = {pr} <= 0.6 is outside the correlation's validity")
    nu2 = 1.841 * (re * pr * geom.d_h / geom.length) ** (1.0 / 3.0)
    if nu2 == 0.0:
        return NU_ONE_WALL
    return (NU_ONE_WALL**3 + nu2**3) ** (1.0 / 3.0)


def h_btms(nu: float, fluid: FluidProps, geom: ChannelGeometry) -> float:
    """Mean film coefficient [W/(m^2*K)] from the Nusselt number."""
    if nu <= 0:
        raise ValidationError("Nusselt number must be positive")
    return fluid.k_fl * nu / geom.d_h


def q_btms_cell(t_cell: float, t_fl_local: float, h: float, area: float) -> float:
    """Heat extracted from one cell [W]; negative when the fluid heats it."""
    if area <= 0:
        raise ValidationError("contact area must be positive")
    return area * h * (t_cell - t_fl_local)


def advect_fluid(t_fl_in: float, q_removed: float, vdot: float, fluid: FluidProps) -> float:
    """Fluid temperature [K] downstream of a cell that dumped ``q_removed`` W."""
    if vdot <= 0:
        if q_removed != 0:
            raise ValidationError("cannot advect heat with zero flow")
        return t_fl_in
    return t_fl_in + q_removed / (fluid.rho * vdot * fluid.cp)


@dataclass(frozen=True)
class ChannelResult:
    """Per-cell extraction along one channel.

    q_cells : W extracted from each cell (index 0 at the inlet)
    t_fl    : K local fluid temperature seen by each cell
    t_out   : K fluid temperature at the channel outlet
    """

    q_cells: np.ndarray
    t_fl: np.ndarray
    t_out: float


def run_channel(
    t_cells: np.ndarray,
    t_fl_in: float,
    vdot_channel: float,
    h: float,
    geom: ChannelGeometry,
    fluid: FluidProps,
    scale: float = 1.0,
) -> ChannelResult:
    """March the coolant past the cells of one channel, inlet to outlet.

    ``scale`` proportionally derates the per-cell extraction (used when the
    machine saturates at its rating); the fluid temperatures stay consistent
    with the actually extracted heat, so the channel energy balance holds.
    """
    t_cells = np.asarray(t_cells, dtype=float)
    n = t_cells.size
    q = np.empty(n)
    t_fl = np.empty(n)
    ha = h * geom.a_btms_cell * scale
    t = t_fl_in
    for j in range(n):
        t_fl[j] = t
        q[j] = ha * (t_cells[j] - t)
        t = advect_fluid(t, q[j], vdot_channel, fluid)
    return ChannelResult(q_cells=q, t_fl=t_fl, t_out=t)


def btms_power(q_total: float, design: BtmsDesign) -> tuple[float, float, bool]:
    """Electrical draw for a demanded heat flow, saturated at the rating.

    Returns (electrical power [W], actually removable heat [W], saturated).
    Above the rating the removable heat is capped and the caller is expected
    to derate extraction proportionally.
    """
    if q_total < 0:
        raise ValidationError("heat flow must be non-negative")
    if q_total <= design.p_rated:
        return q_total / design.k_btms, q_total, False
    return design.p_rated / design.k_btms, design.p_rated, True


def btms_mass(design: BtmsDesign) -> float:
    """Cooling-system mass [kg]: loop plus machine scaled by power density."""
    return design.m_loop + design.p_rated / design.rho_p

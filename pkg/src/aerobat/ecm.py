"""Second-order equivalent circuit model of the cell and pack bookkeeping.

The pack is n_s cells in series by n_p strings in parallel.  All cells in a
parallel group carry the same current (uniform split), so one electrical
state (SOC plus two RC over-voltages) represents every cell; temperatures
may still differ per cell.  Terminal voltage under load:

    U_cell = U_OC(soc) - I_cell * R0(soc) - U1 - U2

with the RC branch over-voltages following dU_n/dt = I/C_n - U_n/(R_n C_n).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import LimitViolation, ValidationError


@dataclass(frozen=True)
class CellParams:
    """Static constants of one pouch cell."""

    q_cell_ah: float            # Ah
    u_max: float                # V
    u_nom: float                # V
    u_min: float                # V
    i_ch_max: float             # A, maximum charge current
    i_dis_max: float            # A, maximum discharge current
    t_min_c: float              # degC
    t_max_c: float              # degC
    t_opt_c: tuple[float, float]  # degC, optimal operating band
    m_cell: float               # kg
    rho_ged: float              # Wh/kg, gravimetric energy density
    length: float               # m
    height: float               # m
    width: float                # m
    c_p: float                  # J/(kg*K)
    k_cond: float = 26.5        # W/(m*K)
    biot: float = 0.0367        # -, must stay << 1 for the lumped model

    def __post_init__(self):
        if self.q_cell_ah <= 0:
            raise ValidationError("cell capacity must be positive")
        if not self.u_min < self.u_nom < self.u_max:
            raise ValidationError("need u_min < u_nom < u_max")
        if min(self.length, self.height, self.width) <= 0:
            raise ValidationError("cell dimensions must be positive")
        if self.biot >= 0.1:
            raise ValidationError(
                f"Biot number {self.biot} >= 0.1 invalidates the lumped thermal model"
            )
        if self.m_cell <= 0 or self.c_p <= 0:
            raise ValidationError("cell mass and heat capacity must be positive")
        lo, hi = self.t_opt_c
        if not self.t_min_c <= lo < hi <= self.t_max_c:
            raise ValidationError("optimal temperature band must sit inside [t_min, t_max]")

    @property
    def surface_area(self) -> float:
        """m^2, total prismatic surface 2(lh + lw + hw)."""
        l, h, w = self.length, self.height, self.width
        return 2.0 * (l * h + l * w + h * w)

    @property
    def footprint(self) -> float:
        """m^2, largest face (length x height), the cold-plate contact side."""
        return self.length * self.height


@dataclass(frozen=True)
class EcmTables:
    """SOC-indexed lookup tables for the 2RC equivalent circuit.

    ``source`` labels provenance; results produced with the built-in
    synthetic tables are marked so downstream output can flag them.
    """

    soc_grid: np.ndarray    # -, ascending in [0, 1]
    u_oc: np.ndarray        # V
    r0: np.ndarray          # ohm
    r1: np.ndarray          # ohm
    c1: np.ndarray          # F
    r2: np.ndarray          # ohm
    c2: np.ndarray          # F
    du_dt: np.ndarray       # V/K, entropy coefficient dU_OC/dT
    source: str = "user"

    def __post_init__(self):
        arrays = {}
        for name in ("soc_grid", "u_oc", "r0", "r1", "c1", "r2", "c2", "du_dt"):
            arrays[name] = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arrays[name])
        n = arrays["soc_grid"].size
        if n < 2:
            raise ValidationError("ECM tables need at least 2 SOC grid points")
        if any(a.size != n for a in arrays.values()):
            raise ValidationError("all ECM tables must share the SOC grid length")
        g = arrays["soc_grid"]
        if np.any(np.diff(g) <= 0) or g[0] < 0 or g[-1] > 1:
            raise ValidationError("soc_grid must be strictly increasing within [0, 1]")
        if np.any(np.diff(arrays["u_oc"]) < 0):
            raise ValidationError("open-circuit voltage must be non-decreasing in SOC")
        for name in ("r0", "r1", "r2", "c1", "c2"):
            if np.any(arrays[name] <= 0):
                raise ValidationError(f"{name} values must be positive")

    def _interp(self, table: np.ndarray, zeta: float) -> float:
        return float(np.interp(zeta, self.soc_grid, table))

    def u_oc_at(self, zeta: float) -> float:
        return self._interp(self.u_oc, zeta)

    def r0_at(self, zeta: float) -> float:
        return self._interp(self.r0, zeta)

    def r1_at(self, zeta: float) -> float:
        return self._interp(self.r1, zeta)

    def c1_at(self, zeta: float) -> float:
        return self._interp(self.c1, zeta)

    def r2_at(self, zeta: float) -> float:
        return self._interp(self.r2, zeta)

    def c2_at(self, zeta: float) -> float:
        return self._interp(self.c2, zeta)

    def du_dt_at(self, zeta: float) -> float:
        return self._interp(self.du_dt, zeta)


def default_ecm_tables() -> EcmTables:
    """Synthetic NMC-like tables: placeholder until measured tables exist.

    The OCV curve is a monotone cubic through (0, 2.5 V), (0.5, 3.4 V),
    (1, 4.2 V) with a flattened mid-range, sampled on 21 knots.  R/C values
    are constants of plausible magnitude.  Anything computed from these
    carries the ``synthetic-default`` source marker.
    """
    soc = np.linspace(0.0, 1.0, 21)
    u_oc = 3.4 + 0.5 * (soc - 0.5) + 4.4 * (soc - 0.5) ** 3
    n = soc.size
    return EcmTables(
        soc_grid=soc,
        u_oc=u_oc,
        r0=np.full(n, 5e-3),
        r1=np.full(n, 2e-3),
        c1=np.full(n, 5e3),
        r2=np.full(n, 3e-3),
        c2=np.full(n, 5e4),
        du_dt=np.zeros(n),
        source="synthetic-default",
    )


@dataclass(frozen=True)
class PackLayout:
    """Series/parallel cell arrangement."""

    n_s: int
    n_p: int

    def __post_init__(self):
        if self.n_s < 1 or self.n_p < 1:
            raise ValidationError("need n_s >= 1 and n_p >= 1")

    @property
    def n_cells(self) -> int:
        return self.n_s * self.n_p


@dataclass(frozen=True)
class CellElecState:
    """Electrical state of one cell: SOC and the two RC over-voltages [V]."""

    zeta: float
    u1: float = 0.0
    u2: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValidationError(f"soc {self.zeta} outside [0, 1]")


@dataclass(frozen=True)
class PackEnergy:
    """Internal battery energy bookkeeping [J]."""

    e_b: float
    e_b_max: float

    def __post_init__(self):
        if not 0.0 <= self.e_b <= self.e_b_max:
            raise ValidationError("need 0 <= e_b <= e_b_max")


@dataclass(frozen=True)
class PackStats:
    u_nom_pack: float   # V
    e_b_max_wh: float   # Wh
    m_cells: float      # kg
    m_b: float          # kg, incl. cell-to-system overhead


# Cell-to-system mass overhead on top of the bare cells.
PACK_OVERHEAD_FACTOR = 1.1


def ocv(zeta: float, tables: EcmTables) -> float:
    """Open-circuit voltage [V] at the given SOC."""
    if not 0.0 <= zeta <= 1.0:
        raise ValidationError(f"soc {zeta} outside [0, 1]")
    return tables.u_oc_at(zeta)


def terminal_voltage(
    state: CellElecState,
    i_cell: float,
    tables: EcmTables,
    u_min: float | None = None,
    u_max: float | None = None,
) -> float:
    """Cell terminal voltage [V] under load; raises when outside the limits."""
    u = tables.u_oc_at(state.zeta) - i_cell * tables.r0_at(state.zeta) - state.u1 - state.u2
    if u_min is not None and u < u_min:
        raise LimitViolation("voltage_low", u, u_min)
    if u_max is not None and u > u_max:
        raise LimitViolation("voltage_high", u, u_max)
    return u


def pack_current(
    p_b: float,
    n_s: int,
    n_p: int,
    state: CellElecState,
    tables: EcmTables,
    i_dis_max: float | None = None,
    u_seed: float | None = None,
    tol: float = 1e-6,
    max_iter: int = 50,
) -> tuple[float, float]:
    """Pack current [A] consistent with the resulting terminal voltage.

    I_b = P_b / (n_s * U_cell) couples to U_cell through the R0 drop, so the
    pair is solved by fixed-point iteration seeded with the previous step's
    terminal voltage; the returned current and voltage agree to ``tol`` volts.
    """
    u_ref = tables.u_oc_at(state.zeta) - state.u1 - state.u2
    u = u_seed if u_seed is not None else u_ref
    if u <= 0:
        u = u_ref
    r0 = tables.r0_at(state.zeta)
    i_b = 0.0
    for _ in range(max_iter):
        i_b = p_b / (n_s * u)
        u_next = u_ref - (i_b / n_p) * r0
        if u_next <= 0:
            raise LimitViolation("power_delivery", p_b, n_s * n_p * u_ref**2 / (4 * r0))
        if abs(u_next - u) < tol:
            u = u_next
            break
        u = u_next
    else:
        if i_dis_max is not None and i_b > n_p * i_dis_max:
            raise LimitViolation("current", i_b, n_p * i_dis_max)
        raise ValidationError(
            f"pack current fixed point did not converge in {max_iter} iterations"
        )
    i_b = p_b / (n_s * u)
    if i_dis_max is not None and i_b > n_p * i_dis_max:
        raise LimitViolation("current", i_b, n_p * i_dis_max)
    return i_b, u


def cell_current(i_b: float, n_p: int) -> float:
    """Per-cell current [A]; every cell in a parallel group carries I_b/n_p."""
    if n_p < 1:
        raise ValidationError("n_p must be >= 1")
    return i_b / n_p


def step_rc(state: CellElecState, i_cell: float, dt: float, tables: EcmTables) -> CellElecState:
    """Advance the RC over-voltages one step (trapezoidal, current held)."""
    if dt <= 0:
        raise ValidationError("dt must be positive")

    def advance(u, r, c):
        a = dt / (2.0 * r * c)
        return ((1.0 - a) * u + dt * i_cell / c) / (1.0 + a)

    z = state.zeta
    return replace(
        state,
        u1=advance(state.u1, tables.r1_at(z), tables.c1_at(z)),
        u2=advance(state.u2, tables.r2_at(z), tables.c2_at(z)),
    )


def step_soc(
    state: CellElecState,
    i_cell: float,
    dt: float,
    q_cell_ah: float,
    floor: float = 0.0,
) -> tuple[CellElecState, bool]:
    """Coulomb-count the SOC one step.

    Returns the new state (SOC clamped to [0, 1]) and a flag that is True
    when the raw SOC fell below ``floor`` -- the breach is reported rather
    than silently clamped away.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if q_cell_ah <= 0:
        raise ValidationError("cell capacity must be positive")
    raw = state.zeta - i_cell * dt / (3600.0 * q_cell_ah)
    breached = raw < floor
    return replace(state, zeta=min(1.0, max(0.0, raw))), breached


def internal_power(zeta: float, i_b: float, tables: EcmTables, n_s: int = 1) -> float:
    """Internal battery power [W]: open-circuit voltage times pack current."""
    return n_s * tables.u_oc_at(zeta) * i_b


def step_energy(energy: PackEnergy, p_i: float, dt: float) -> PackEnergy:
    """Deplete the internal energy by p_i*dt (pass the step-average power)."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    return replace(energy, e_b=energy.e_b - p_i * dt)


def pack_nominal_stats(layout: PackLayout, cell: CellParams) -> PackStats:
    """Nameplate pack figures from the layout and cell constants."""
    u_nom_pack = layout.n_s * cell.u_nom
    return PackStats(
        u_nom_pack=u_nom_pack,
        e_b_max_wh=u_nom_pack * layout.n_p * cell.q_cell_ah,
        m_cells=layout.n_cells * cell.m_cell,
        m_b=PACK_OVERHEAD_FACTOR * layout.n_cells * cell.m_cell,
    )


ECM_CSV_COLUMNS = ("soc", "Uoc_V", "R0_ohm", "R1_ohm", "C1_F", "R2_ohm", "C2_F", "dUocdT_VpK")


def load_ecm_tables_csv(path, ref_temp_c: float = 23.0) -> EcmTables:
    """Read ECM tables from CSV.

    Expected header ``soc,Uoc_V,R0_ohm,R1_ohm,C1_F,R2_ohm,C2_F,dUocdT_VpK``
    with an optional trailing ``temp_C`` column.  When several temperature
    slices are present, the slice closest to ``ref_temp_c`` is used.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty ECM table file")
    header = [c.strip() for c in rows[0]]
    base = list(ECM_CSV_COLUMNS)
    has_temp = header == base + ["temp_C"]
    if not has_temp and header != base:
        raise ValidationError(f"{path}: unexpected ECM table header {','.join(header)}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed numeric data ({exc})") from exc
    if has_temp:
        temps = np.unique(data[:, -1])
        pick = temps[np.argmin(np.abs(temps - ref_temp_c))]
        data = data[data[:, -1] == pick][:, :-1]
    order = np.argsort(data[:, 0])
    data = data[order]
    return EcmTables(
        soc_grid=data[:, 0],
        u_oc=data[:, 1],
        r0=data[:, 2],
        r1=data[:, 3],
        c1=data[:, 4],
        r2=data[:, 5],
        c2=data[:, 6],
        du_dt=data[:, 7],
        source=str(path),
    )


def save_ecm_tables_csv(path, tables: EcmTables) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ECM_CSV_COLUMNS)
        for i in range(tables.soc_grid.size):
            writer.writerow(
                [
                    f"{tables.soc_grid[i]:.6g}",
                    f"{tables.u_oc[i]:.8g}",
                    f"{tables.r0[i]:.8g}",
                    f"{tables.r1[i]:.8g}",
                    f"{tables.c1[i]:.8g}",
                    f"{tables.r2[i]:.8g}",
                    f"{tables.c2[i]:.8g}",
                    f"{tables.du_dt[i]:.8g}",
                ]
            )

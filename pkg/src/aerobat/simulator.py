"""Backward-facing quasi-static mission simulation of the full system.

Each time step works demand backward through the chain: mission kinematics
fix the thrust, the powertrain maps it to DC power, auxiliary and cooling
loads add on, and the battery delivers the total.  Cell heat generation,
cold-plate extraction with coolant advection, and the lumped thermal states
advance alongside; internal energy is integrated trapezoidally.

Cooling electrical draw at a given step uses the heat extracted during the
previous step (one-step lag); at 1 s steps the error is negligible against
thermal time constants of hundreds of seconds.  Hard safety limits (cell
voltage, current, temperature, SOC floor) stop a run early; the optimal
temperature band only flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .atmosphere import FlightProfile, air_density, derive_kinematics
from .btms import (
    BtmsDesign,
    ChannelGeometry,
    FluidProps,
    btms_mass,
    btms_power,
    fluid_velocity,
    h_btms,
    nusselt,
    reynolds,
    run_channel,
)
from .ecm import (
    CellElecState,
    CellParams,
    EcmTables,
    PackLayout,
    cell_current,
    internal_power,
    ocv,
    pack_current,
    pack_nominal_stats,
    step_rc,
    step_soc,
)
from .errors import LimitViolation, ValidationError
from .powertrain import (
    AircraftParams,
    PowertrainParams,
    ac_power,
    dc_power,
    motor_power,
    motor_torque,
    thrust,
    total_mass,
)
from .thermal import ThermalEnv, c_to_k, k_to_c

WH_TO_J = 3600.0


@dataclass(frozen=True)
class BtmsSetup:
    """Cooling system bundle: design vector, coolant, and duct geometry."""

    design: BtmsDesign
    fluid: FluidProps
    geometry: ChannelGeometry


@dataclass(frozen=True)
class Violation:
    """One recorded constraint event."""

    kind: str
    t: float
    value: float
    limit: float
    hard: bool


@dataclass
class SimConfig:
    """Everything one simulation needs.

    Construction validates cross-cutting requirements: flight path angle
    bounds, the explicit thermal step stability bound, and (when cooling is
    present) the flow correlation's validity.
    """

    profile: FlightProfile
    aircraft: AircraftParams
    powertrain: PowertrainParams
    cell: CellParams
    ecm: EcmTables
    layout: PackLayout
    env: ThermalEnv
    btms: BtmsSetup | None = None
    soc_start: float = 1.0
    soc_floor: float = 0.15
    soc_max: float = 1.0
    p_b_min: float = 0.0
    p_b_max: float = math.inf
    radiation_enabled: bool = False
    t_init: float | None = None          # K; ambient when None
    markers: tuple[str, ...] = ()

    # derived in __post_init__
    btms_h: float = field(init=False, default=0.0)
    btms_vdot_channel: float = field(init=False, default=0.0)

    def __post_init__(self):
        if not 0.0 <= self.soc_floor < 1.0:
            raise ValidationError("soc_floor must lie in [0, 1)")
        if not self.soc_floor < self.soc_start <= self.soc_max <= 1.0:
            raise ValidationError("need soc_floor < soc_start <= soc_max <= 1")
        ha = self.cell.surface_area * self.env.h_conv
        if self.btms is not None:
            design, fluid, geom = self.btms.design, self.btms.fluid, self.btms.geometry
            if design.vdot_fl <= 0:
                raise ValidationError("cooling flow rate must be positive when enabled")
            self.btms_vdot_channel = design.vdot_fl / self.layout.n_s
            v = fluid_velocity(self.btms_vdot_channel, geom)
            re = reynolds(v, geom, fluid)
            nu = nusselt(re, fluid.pr, geom)
            self.btms_h = h_btms(nu, fluid, geom)
            ha += self.btms_h * geom.a_btms_cell
        if ha > 0:
            dt_limit = self.cell.c_p * self.cell.m_cell / ha
            if self.profile.dt >= dt_limit:
                raise ValidationError(
                    f"time step {self.profile.dt} s violates the explicit thermal "
                    f"stability bound {dt_limit:.3g} s"
                )

    @property
    def dt(self) -> float:
        return self.profile.dt


@dataclass
class SimResult:
    """Per-step series plus run-level figures.

    Powers are W, energies J, currents A, voltages V; cell and fluid
    temperatures are Kelvin arrays of shape (n_steps, n_p).
    """

    t: np.ndarray
    p_m: np.ndarray
    p_ac: np.ndarray
    p_dc: np.ndarray
    p_btms: np.ndarray       # electrical draw of the cooling system
    q_btms: np.ndarray       # heat extracted from the cells (cooling watts)
    p_b: np.ndarray
    p_i: np.ndarray
    i_b: np.ndarray
    u_cell: np.ndarray
    zeta: np.ndarray
    e_b: np.ndarray
    t_cell: np.ndarray
    t_fl: np.ndarray | None
    q_net_pack: np.ndarray   # step-average net heat into all cells, W
    e_b_max: float
    delta_e_b: float
    range_km: float
    max_t_cell: float        # K
    completed: bool
    stop_reason: str | None
    violations: list[Violation]
    btms_saturated: bool
    btms_reverse_heating: bool
    metadata: dict

    @property
    def t_cell_min(self) -> np.ndarray:
        return self.t_cell.min(axis=1)

    @property
    def t_cell_mean(self) -> np.ndarray:
        return self.t_cell.mean(axis=1)

    @property
    def t_cell_max(self) -> np.ndarray:
        return self.t_cell.max(axis=1)


class _Monitor:
    """Collects first-occurrence violations and the hard stop reason."""

    def __init__(self):
        self.violations: list[Violation] = []
        self._seen: set[str] = set()
        self.stop_reason: str | None = None

    def record(self, kind: str, t: float, value: float, limit: float, hard: bool):
        if kind not in self._seen:
            self._seen.add(kind)
            self.violations.append(Violation(kind, t, value, limit, hard))
        if hard and self.stop_reason is None:
            self.stop_reason = kind


def _channel_state(temps, config: SimConfig):
    """Scaled channel pass at the given temperatures.

    Returns (result, actual total cooling W, saturated, scale).
    """
    setup = config.btms
    ch = run_channel(
        temps, setup.design.t_fl, config.btms_vdot_channel, config.btms_h,
        setup.geometry, setup.fluid,
    )
    q_demand = config.layout.n_s * float(np.sum(ch.q_cells))
    p_elec, q_ok, saturated = btms_power(max(q_demand, 0.0), setup.design)
    scale = 1.0
    if saturated and q_demand > 0:
        scale = q_ok / q_demand
        ch = run_channel(
            temps, setup.design.t_fl, config.btms_vdot_channel, config.btms_h,
            setup.geometry, setup.fluid, scale=scale,
        )
    q_actual = config.layout.n_s * float(np.sum(ch.q_cells))
    return ch, q_actual, saturated, scale


def simulate(config: SimConfig) -> SimResult:
    """Run the mission; see the module docstring for the coupling scheme."""
    prof = config.profile
    n = len(prof)
    dt = prof.dt
    aircraft, pt, cell, tables = config.aircraft, config.powertrain, config.cell, config.ecm
    layout, env = config.layout, config.env
    n_p = layout.n_p

    kin = derive_kinematics(prof, (aircraft.gamma_min, aircraft.gamma_max))
    stats = pack_nominal_stats(layout, cell)
    e_b_max = stats.e_b_max_wh * WH_TO_J
    m_btms = btms_mass(config.btms.design) if config.btms else 0.0
    m = total_mass(aircraft.m_empty, stats.m_b, m_btms, aircraft.m_max)

    area = cell.surface_area
    cpm = cell.c_p * cell.m_cell
    t_opt_lo, t_opt_hi = (c_to_k(x) for x in cell.t_opt_c)
    t_max_k = c_to_k(cell.t_max_c)

    series = {
        name: np.zeros(n)
        for name in ("p_m", "p_ac", "p_dc", "p_btms", "q_btms", "p_b", "p_i", "i_b", "u_cell", "zeta", "e_b")
    }
    t_cell = np.zeros((n, n_p))
    t_fl = np.zeros((n, n_p)) if config.btms else None
    q_net_pack = np.zeros(max(n - 1, 0))

    elec = CellElecState(zeta=config.soc_start)
    temps = np.full(n_p, config.t_init if config.t_init is not None else env.t_inf, dtype=float)
    e_b = config.soc_start * e_b_max
    mon = _Monitor()
    saturated_any = False
    reverse_any = False

    def ambient_diss(tv):
        q = area * env.h_conv * (tv - env.t_inf)
        if config.radiation_enabled:
            q = q + area * env.epsilon * env.sigma * (tv**4 - env.t_inf**4)
        return q

    def compute_sample(k, p_btms_elec, u_seed):
        rho = air_density(prof.h[k])
        f_t = thrust(rho, prof.v[k], kin.vdot[k], kin.gamma[k], m, aircraft)
        p_m = motor_power(f_t, prof.v[k], pt.eta_p, p_max=pt.p_installed)
        if p_m <= 0.0:
            # braking thrust produces no electrical demand (no regeneration)
            p_m, tau, p_ac = 0.0, 0.0, 0.0
        else:
            tau = motor_torque(p_m, pt.omega, pt.tau_m_max)
            p_ac = ac_power(p_m, tau, pt.eta_m)
        p_dc = dc_power(p_ac, pt.beta)
        p_b = p_dc + p_btms_elec + pt.p_aux
        i_b, u_t = pack_current(
            p_b, layout.n_s, n_p, elec, tables, i_dis_max=cell.i_dis_max, u_seed=u_seed
        )
        p_i = internal_power(elec.zeta, i_b, tables, layout.n_s)
        return p_m, p_ac, p_dc, p_b, i_b, u_t, p_i

    def store(k, vals, p_btms_elec, q_btms_actual):
        p_m, p_ac, p_dc, p_b, i_b, u_t, p_i = vals
        series["p_m"][k] = p_m
        series["p_ac"][k] = p_ac
        series["p_dc"][k] = p_dc
        series["p_btms"][k] = p_btms_elec
        series["q_btms"][k] = q_btms_actual
        series["p_b"][k] = p_b
        series["i_b"][k] = i_b
        series["u_cell"][k] = u_t
        series["p_i"][k] = p_i
        series["zeta"][k] = elec.zeta
        series["e_b"][k] = e_b
        t_cell[k] = temps
        tk = prof.t[k]
        if u_t < cell.u_min:
            mon.record("voltage_low", tk, u_t, cell.u_min, hard=True)
        elif u_t > cell.u_max + 1e-12:
            mon.record("voltage_high", tk, u_t, cell.u_max, hard=True)
        if p_b > config.p_b_max:
            mon.record("p_b_high", tk, p_b, config.p_b_max, hard=False)
        tmax, tmin = float(temps.max()), float(temps.min())
        if tmax > t_max_k:
            mon.record("temperature", tk, tmax, t_max_k, hard=True)
        elif tmax - t_opt_hi >= t_opt_lo - tmin and tmax > t_opt_hi:
            mon.record("t_cell_opt", tk, tmax, t_opt_hi, hard=False)
        elif tmin < t_opt_lo:
            mon.record("t_cell_opt", tk, tmin, t_opt_lo, hard=False)
        if e_b < config.soc_floor * e_b_max:
            mon.record("e_b_window", tk, e_b, config.soc_floor * e_b_max, hard=False)

    # sample 0
    last = -1
    p_btms_elec = 0.0
    q_btms_now = 0.0
    try:
        if config.btms is not None:
            ch, q_btms_now, sat, _ = _channel_state(temps, config)
            saturated_any |= sat
            p_btms_elec = max(q_btms_now, 0.0) / config.btms.design.k_btms
            t_fl[0] = ch.t_fl
        vals = compute_sample(0, p_btms_elec, None)
        store(0, vals, p_btms_elec, q_btms_now)
        last = 0
    except LimitViolation as exc:
        mon.record(exc.kind, 0.0, exc.value, exc.limit, hard=True)

    k = 0
    while last == k and k < n - 1 and mon.stop_reason is None:
        i_cell_k = cell_current(series["i_b"][k], n_p)
        u_oc_k = ocv(elec.zeta, tables)
        q_irr_k = i_cell_k * (u_oc_k - series["u_cell"][k])
        du_dt_k = tables.du_dt_at(elec.zeta)

        # thermal advance (explicit trapezoidal over the step)
        if config.btms is not None:
            ch0, q_act0, sat0, scale = _channel_state(temps, config)
            reverse_any |= bool(np.any(ch0.q_cells < 0))
            q_gen0 = q_irr_k + i_cell_k * temps * du_dt_k
            net0 = q_gen0 - ambient_diss(temps) - ch0.q_cells
            pred = temps + dt * net0 / cpm
            ch1 = run_channel(
                pred, config.btms.design.t_fl, config.btms_vdot_channel, config.btms_h,
                config.btms.geometry, config.btms.fluid, scale=scale,
            )
            q_gen1 = q_irr_k + i_cell_k * pred * du_dt_k
            net1 = q_gen1 - ambient_diss(pred) - ch1.q_cells
            q_extracted = 0.5 * layout.n_s * float(np.sum(ch0.q_cells) + np.sum(ch1.q_cells))
            saturated_any |= sat0
        else:
            q_gen0 = q_irr_k + i_cell_k * temps * du_dt_k
            net0 = q_gen0 - ambient_diss(temps)
            pred = temps + dt * net0 / cpm
            q_gen1 = q_irr_k + i_cell_k * pred * du_dt_k
            net1 = q_gen1 - ambient_diss(pred)
            q_extracted = 0.0

        avg_net = 0.5 * (net0 + net1)
        temps = temps + dt * avg_net / cpm
        q_net_pack[k] = layout.n_s * float(np.sum(avg_net))
        p_btms_elec = (
            max(q_extracted, 0.0) / config.btms.design.k_btms if config.btms else 0.0
        )

        # electrical advance with the step-k current
        elec = step_rc(elec, i_cell_k, dt, tables)
        elec, soc_breached = step_soc(elec, i_cell_k, dt, cell.q_cell_ah, floor=config.soc_floor)

        # sample k+1
        try:
            q_btms_now = 0.0
            if config.btms is not None:
                chl, q_btms_now, satl, _ = _channel_state(temps, config)
                saturated_any |= satl
                t_fl[k + 1] = chl.t_fl
            vals = compute_sample(k + 1, p_btms_elec, series["u_cell"][k])
            p_i_next = vals[-1]
            e_b = e_b - dt * 0.5 * (series["p_i"][k] + p_i_next)
            store(k + 1, vals, p_btms_elec, q_btms_now)
            last = k + 1
        except LimitViolation as exc:
            mon.record(exc.kind, prof.t[k + 1], exc.value, exc.limit, hard=True)
            break
        if soc_breached:
            mon.record("soc_floor", prof.t[k + 1], elec.zeta, config.soc_floor, hard=True)
        k += 1

    n_rec = last + 1
    sl = slice(0, n_rec)
    completed = n_rec == n and mon.stop_reason is None
    delta = series["e_b"][0] - series["e_b"][last] if n_rec > 0 else 0.0
    rng_km = float(np.trapz(prof.v[sl], dx=dt)) / 1000.0 if n_rec > 1 else 0.0
    max_t = float(t_cell[sl].max()) if n_rec > 0 else float("nan")

    metadata = {
        "m_total_kg": m,
        "m_b_kg": stats.m_b,
        "m_btms_kg": m_btms,
        "e_b_max_wh": stats.e_b_max_wh,
        "u_nom_pack_v": stats.u_nom_pack,
        "markers": list(config.markers) + (
            ["synthetic-ecm"] if tables.source == "synthetic-default" else []
        ),
    }
    return SimResult(
        t=prof.t[sl].copy(),
        p_m=series["p_m"][sl],
        p_ac=series["p_ac"][sl],
        p_dc=series["p_dc"][sl],
        p_btms=series["p_btms"][sl],
        q_btms=series["q_btms"][sl],
        p_b=series["p_b"][sl],
        p_i=series["p_i"][sl],
        i_b=series["i_b"][sl],
        u_cell=series["u_cell"][sl],
        zeta=series["zeta"][sl],
        e_b=series["e_b"][sl],
        t_cell=t_cell[sl],
        t_fl=t_fl[sl] if t_fl is not None else None,
        q_net_pack=q_net_pack[: max(n_rec - 1, 0)],
        e_b_max=e_b_max,
        delta_e_b=float(delta),
        range_km=rng_km,
        max_t_cell=max_t,
        completed=completed,
        stop_reason=mon.stop_reason,
        violations=mon.violations,
        btms_saturated=saturated_any,
        btms_reverse_heating=reverse_any,
        metadata=metadata,
    )


def check_constraints(result: SimResult, config: SimConfig) -> dict[str, float]:
    """Maximum violation magnitude per design constraint.

    Only violated constraints appear in the report (a clean run yields an
    empty dict); magnitudes are in the constraint's natural unit.
    """
    raw: dict[str, float] = {}
    if result.t.size:
        raw["p_b"] = max(
            float(np.max(result.p_b) - config.p_b_max),
            float(config.p_b_min - np.min(result.p_b)),
        )
        raw["u_cell"] = max(
            float(config.cell.u_min - np.min(result.u_cell)),
            float(np.max(result.u_cell) - config.cell.u_max),
        )
        lo, hi = (c_to_k(x) for x in config.cell.t_opt_c)
        raw["t_cell_opt"] = max(
            float(result.t_cell.max() - hi), float(lo - result.t_cell.min())
        )
        raw["e_b"] = max(
            float(config.soc_floor * result.e_b_max - np.min(result.e_b)),
            float(np.max(result.e_b) - config.soc_max * result.e_b_max),
        )
        i_max = config.layout.n_p * config.cell.i_dis_max
        raw["i_b"] = max(float(np.max(result.i_b) - i_max), float(-np.min(result.i_b)))
        if config.btms is not None:
            raw["p_btms"] = float(np.max(result.q_btms) - config.btms.design.p_rated)
            raw["vdot_fl"] = config.btms.design.vdot_fl - config.btms.fluid.vdot_max

    # hard faults whose offending sample could not be stored (e.g. a current
    # cap inside the pack-current solve) still must surface in the report
    fold = {"voltage_low": "u_cell", "voltage_high": "u_cell", "current": "i_b",
            "temperature": "t_cell_opt"}
    for v in result.violations:
        if not v.hard:
            continue
        if v.kind == "soc_floor":
            raw["e_b"] = max(raw.get("e_b", 0.0), v.magnitude * result.e_b_max)
        else:
            key = fold.get(v.kind, v.kind)
            raw[key] = max(raw.get(key, 0.0), v.magnitude)
    return {k: val for k, val in raw.items() if val > 1e-12}


@dataclass(frozen=True)
class SweepRow:
    n_p: int
    h_conv: float
    range_km: float
    max_t_cell_c: float
    delta_e_b_kwh: float
    completed: bool
    stop_reason: str | None
    t_opt_exceeded: bool


def _estimate_cruise_power(config: SimConfig, m: float, v: float, h: float) -> float:
    rho = air_density(h)
    f_t = thrust(rho, v, 0.0, 0.0, m, config.aircraft)
    pt = config.powertrain
    p_m = motor_power(f_t, v, pt.eta_p)
    tau = motor_torque(p_m, pt.omega)
    return dc_power(ac_power(p_m, tau, pt.eta_m), pt.beta) + pt.p_aux


def range_sweep(
    config: SimConfig,
    np_list: list[int],
    h_list: list[float],
    max_duration: float = 40000.0,
) -> list[SweepRow]:
    """Cruise-to-SOC-floor range over parallel-string count and convection.

    Each combination rebuilds the pack (and with it the aircraft mass) and
    flies the base profile's cruise point until the SOC floor or a hard
    limit stops it.  No cooling system is fitted for these runs.
    """
    from .atmosphere import make_cruise_profile

    if not np_list or not h_list:
        raise ValidationError("np_list and h_list must be non-empty")
    speed = float(config.profile.v[0])
    alt = float(config.profile.h[0])
    if speed <= 0:
        raise ValidationError("range sweep needs a moving cruise profile")

    rows = []
    for n_p in np_list:
        layout = PackLayout(config.layout.n_s, n_p)
        stats = pack_nominal_stats(layout, config.cell)
        for h_conv in h_list:
            env = replace(config.env, h_conv=h_conv)
            try:
                m = total_mass(
                    config.aircraft.m_empty, stats.m_b, 0.0, config.aircraft.m_max
                )
                p_est = _estimate_cruise_power(config, m, speed, alt)
                usable = (config.soc_start - config.soc_floor) * stats.e_b_max_wh * WH_TO_J
                duration = min(max_duration, 1.3 * usable / p_est + 600.0)
                cfg = replace(
                    config,
                    profile=make_cruise_profile(duration, alt, speed, config.dt),
                    layout=layout,
                    env=env,
                    btms=None,
                )
                result = simulate(cfg)
                rows.append(
                    SweepRow(
                        n_p=n_p,
                        h_conv=h_conv,
                        range_km=result.range_km,
                        max_t_cell_c=k_to_c(result.max_t_cell),
                        delta_e_b_kwh=result.delta_e_b / 3.6e6,
                        completed=result.stop_reason == "soc_floor",
                        stop_reason=result.stop_reason,
                        t_opt_exceeded=any(
                            v.kind == "t_cell_opt" for v in result.violations
                        ),
                    )
                )
            except LimitViolation as exc:
                rows.append(
                    SweepRow(
                        n_p=n_p,
                        h_conv=h_conv,
                        range_km=0.0,
                        max_t_cell_c=float("nan"),
                        delta_e_b_kwh=0.0,
                        completed=False,
                        stop_reason=exc.kind,
                        t_opt_exceeded=False,
                    )
                )
    return rows

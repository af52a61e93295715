"""Cell characterization: pulse test protocol, ECM fitting, cp estimation.

Discharge current is positive throughout the package; charge currents in a
schedule are therefore negative.  The pulse test steps the cell down in
10 % SOC increments, exciting the circuit with a short discharge pulse, a
rest, and a charge pulse at each level; resistances and time constants are
identified per SOC level from those windows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .ecm import CellElecState, CellParams, EcmTables, step_rc, step_soc, terminal_voltage
from .errors import FitError, ValidationError

HPPC_CSV_COLUMNS = ("t_s", "I_A", "U_V", "T_C")

CV_CUTOFF_C_RATE = 0.05
_REST_EPS_A = 1e-9


@dataclass(frozen=True)
class HppcPhase:
    """One schedule segment: constant current, constant voltage, or rest."""

    kind: str                    # "cc" | "cv" | "rest"
    duration: float | None = None   # s; None = until cutoff (cv only)
    current: float = 0.0         # A, cc phases (discharge positive)
    target_v: float | None = None   # V, cv phases
    cutoff_a: float | None = None   # A, cv exit threshold on |I|
    i_limit: float | None = None    # A, cv current magnitude clamp
    label: str = ""


def generate_hppc_protocol(cell: CellParams, repetitions: int = 10) -> list[HppcPhase]:
    """Pulse-test schedule for the given cell.

    Full charge (CC at the cell's charge limit, CV taper to 0.05 C), one
    hour of rest, then per SOC increment: 1 C discharge for 30 s, 40 s rest,
    0.75 C charge for 10 s, 1 C discharge for 6 min, one hour of rest.
    """
    if cell.q_cell_ah <= 0:
        raise ValidationError("cell capacity must be positive")
    one_c = cell.q_cell_ah
    phases = [
        HppcPhase(kind="cc", duration=3600.0 * 2, current=-cell.i_ch_max, label="charge-cc"),
        HppcPhase(
            kind="cv",
            duration=3600.0 * 2,
            target_v=cell.u_max,
            cutoff_a=CV_CUTOFF_C_RATE * one_c,
            i_limit=cell.i_ch_max,
            label="charge-cv",
        ),
        HppcPhase(kind="rest", duration=3600.0, label="rest-initial"),
    ]
    for rep in range(repetitions):
        phases += [
            HppcPhase(kind="cc", duration=30.0, current=one_c, label=f"pulse-{rep}"),
            HppcPhase(kind="rest", duration=40.0, label=f"pulse-rest-{rep}"),
            HppcPhase(kind="cc", duration=10.0, current=-0.75 * one_c, label=f"charge-pulse-{rep}"),
            HppcPhase(kind="cc", duration=360.0, current=one_c, label=f"deplete-{rep}"),
            HppcPhase(kind="rest", duration=3600.0, label=f"rest-{rep}"),
        ]
    return phases


@dataclass(frozen=True)
class ScheduleResult:
    """Simulated cycler log for a schedule."""

    t: np.ndarray      # s
    i: np.ndarray      # A
    u: np.ndarray      # V
    zeta: np.ndarray   # -
    truncated: bool    # True when a discharge hit the lower voltage cutoff


def simulate_current_schedule(
    phases: list[HppcPhase],
    cell: CellParams,
    tables: EcmTables,
    dt: float = 1.0,
    zeta0: float = 1.0,
) -> ScheduleResult:
    """Run the equivalent circuit through a schedule and log t, I, U, SOC.

    Charge segments end early once the terminal voltage reaches the cell
    maximum; a discharge reaching the cell minimum truncates the whole log,
    as a cycler's safety cutoff would.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    state = CellElecState(zeta=zeta0)
    t_log, i_log, u_log, z_log = [], [], [], []
    t = 0.0
    truncated = False

    idx = 0
    elapsed = 0.0
    while idx < len(phases):
        ph = phases[idx]
        if ph.duration is not None and elapsed >= ph.duration:
            idx += 1
            elapsed = 0.0
            continue

        if ph.kind == "rest":
            i_now = 0.0
        elif ph.kind == "cc":
            i_now = ph.current
        elif ph.kind == "cv":
            z = state.zeta
            i_now = (tables.u_oc_at(z) - state.u1 - state.u2 - ph.target_v) / tables.r0_at(z)
            if ph.i_limit is not None:
                i_now = max(i_now, -abs(ph.i_limit)) if i_now < 0 else min(i_now, abs(ph.i_limit))
            if ph.cutoff_a is not None and abs(i_now) <= ph.cutoff_a:
                idx += 1
                elapsed = 0.0
                continue
        else:
            raise ValidationError(f"unknown phase kind {ph.kind!r}")

        u_now = terminal_voltage(state, i_now, tables)
        if ph.kind == "cc" and i_now < 0 and u_now >= cell.u_max:
            idx += 1
            elapsed = 0.0
            continue
        if i_now > 0 and u_now <= cell.u_min:
            truncated = True
            break

        t_log.append(t)
        i_log.append(i_now)
        u_log.append(u_now)
        z_log.append(state.zeta)

        state = step_rc(state, i_now, dt, tables)
        state, _ = step_soc(state, i_now, dt, cell.q_cell_ah)
        t += dt
        elapsed += dt

    return ScheduleResult(
        t=np.array(t_log),
        i=np.array(i_log),
        u=np.array(u_log),
        zeta=np.array(z_log),
        truncated=truncated,
    )


def _branch_response(i: np.ndarray, dt: float, tau: float) -> np.ndarray:
    """Unit-resistance RC branch response to the sampled current.

    Uses the same trapezoidal discretization as the simulator's RC update,
    so a noise-free fit of simulated data can reach zero residual.
    """
    g = np.empty(i.size)
    g[0] = 0.0
    a = dt / (2.0 * tau)
    decay = (1.0 - a) / (1.0 + a)
    drive = dt / (tau * (1.0 + a))
    for k in range(i.size - 1):
        g[k + 1] = decay * g[k] + drive * i[k]
    return g


def _detect_pulse_windows(
    i: np.ndarray, dt: float, min_rest_s: float = 300.0, pre_s: float = 10.0, span_s: float = 80.0
) -> list[tuple[int, int, int]]:
    """Locate (window_start, pulse_start, window_end) index triples.

    A fitting window is a discharge onset preceded by at least
    ``min_rest_s`` of rest, padded with ``pre_s`` of baseline and covering
    ``span_s`` of excitation.
    """
    rest = np.abs(i) < _REST_EPS_A
    min_rest = int(round(min_rest_s / dt))
    pre = int(round(pre_s / dt))
    span = int(round(span_s / dt))
    windows = []
    run = 0
    for k in range(i.size):
        if rest[k]:
            run += 1
            continue
        if i[k] > 0 and run >= min_rest:
            ws = max(0, k - pre)
            we = min(i.size, k + span)
            if we - k >= span // 2:
                windows.append((ws, k, we))
        run = 0
    return windows


def _window_design(
    i: np.ndarray, soc: np.ndarray, dt: float, soc0: float, log_taus: np.ndarray
) -> np.ndarray:
    tau1, tau2 = np.exp(log_taus)
    cols = [
        np.ones(i.size),
        soc - soc0,
        -i,
        -_branch_response(i, dt, tau1),
        -_branch_response(i, dt, tau2),
    ]
    return np.column_stack(cols)


def _solve_window(a: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    coeffs, _, rank, _ = np.linalg.lstsq(a, u, rcond=None)
    if rank < a.shape[1]:
        raise FitError("underdetermined fitting window (insufficient excitation)")
    return coeffs, u - a @ coeffs


def fit_ecm(
    t: np.ndarray,
    i: np.ndarray,
    u: np.ndarray,
    soc: np.ndarray,
) -> tuple[EcmTables, float]:
    """Identify 2RC parameters per SOC level from pulse-test data.

    Each detected pulse window is fitted by separable least squares: for a
    candidate pair of branch time constants the local open-circuit voltage,
    its local SOC slope, and the three resistances enter linearly; the time
    constants are grid-seeded and then polished.  Returns the assembled
    tables and the voltage RMSE over all fitted windows.
    """
    t, i, u, soc = (np.asarray(a, dtype=float) for a in (t, i, u, soc))
    if not t.size == i.size == u.size == soc.size:
        raise ValidationError("t, i, u, soc must be aligned")
    if t.size < 10:
        raise ValidationError("need at least 10 samples")
    if np.max(np.abs(i)) < 1e-6 or np.ptp(u) < 1e-9:
        raise FitError("no excitation in the data (flat voltage or zero current)")
    dt = float(t[1] - t[0])

    windows = _detect_pulse_windows(i, dt)
    if not windows:
        raise FitError("no pulse windows detected in the current profile")

    grid1 = np.log(np.geomspace(0.5, 80.0, 7))
    grid2 = np.log(np.geomspace(20.0, 3000.0, 7))

    rows = []
    sq_sum = 0.0
    n_samples = 0
    for ws, k0, we in windows:
        iw, uw, sw = i[ws:we], u[ws:we], soc[ws:we]
        soc0 = float(soc[k0])

        def residual(log_taus, iw=iw, uw=uw, sw=sw, soc0=soc0):
            a = _window_design(iw, sw, dt, soc0, np.asarray(log_taus))
            _, res = _solve_window(a, uw)
            return res

        best = None
        for lt1 in grid1:
            for lt2 in grid2:
                if lt2 <= lt1:
                    continue
                sse = float(np.sum(residual((lt1, lt2)) ** 2))
                if best is None or sse < best[0]:
                    best = (sse, (lt1, lt2))
        sol = least_squares(
            residual,
            x0=np.array(best[1]),
            bounds=(np.log(0.05), np.log(5e4)),
            xtol=1e-14,
            ftol=1e-14,
            gtol=1e-14,
        )
        a = _window_design(iw, sw, dt, soc0, sol.x)
        coeffs, res = _solve_window(a, uw)
        uoc0, _, r0, r1, r2 = coeffs
        tau1, tau2 = np.exp(sol.x)
        if min(r0, r1, r2) <= 0:
            raise FitError(f"non-physical resistance fitted at soc={soc0:.3f}")
        if not 0.0 <= soc0 <= 1.0:
            raise FitError(f"window SOC {soc0:.3f} outside [0, 1]")
        rows.append((soc0, uoc0, r0, r1, tau1 / r1, r2, tau2 / r2))
        sq_sum += float(np.sum(res**2))
        n_samples += res.size

    rows.sort(key=lambda r: r[0])
    cols = np.array(rows)
    if cols.shape[0] < 2:
        raise FitError("need pulses at two or more SOC levels to build tables")
    tables = EcmTables(
        soc_grid=cols[:, 0],
        u_oc=cols[:, 1],
        r0=cols[:, 2],
        r1=cols[:, 3],
        c1=cols[:, 4],
        r2=cols[:, 5],
        c2=cols[:, 6],
        du_dt=np.zeros(cols.shape[0]),
        source="hppc-fit",
    )
    rmse = float(np.sqrt(sq_sum / n_samples))
    return tables, rmse


def estimate_cp(
    u: np.ndarray,
    i: np.ndarray,
    dt: float,
    m_cell: float,
    t0_c: float,
    t_end_c: float,
) -> float:
    """Specific heat [J/(kg*K)] from a constant-current discharge log.

    The consumed energy is Q = -integral of U*I dt over the window (with
    this log convention discharge current is negative so Q comes out
    positive), and c_p = Q / (m * (T_end - T0)).
    """
    u = np.asarray(u, dtype=float)
    i = np.asarray(i, dtype=float)
    if u.size != i.size or u.size < 2:
        raise ValidationError("voltage and current series must align, >= 2 samples")
    if dt <= 0 or m_cell <= 0:
        raise ValidationError("dt and m_cell must be positive")
    if t_end_c == t0_c:
        raise ValidationError("temperature did not change; cp is undefined")
    q = -np.trapz(u * i, dx=dt)
    return float(q / (m_cell * (t_end_c - t0_c)))


def derive_soc_series(
    i: np.ndarray, dt: float, q_cell_ah: float, zeta_full: float = 1.0
) -> np.ndarray:
    """Coulomb-count an SOC series for a cycler log.

    The cell is taken as fully charged at the end of the first rest of at
    least 30 minutes (the rest that follows the initial full charge); the
    count runs forward and backward from that anchor.
    """
    i = np.asarray(i, dtype=float)
    if q_cell_ah <= 0 or dt <= 0:
        raise ValidationError("dt and capacity must be positive")
    rest = np.abs(i) < _REST_EPS_A
    min_run = int(round(1800.0 / dt))
    anchor = 0
    run = 0
    for k in range(i.size):
        if rest[k]:
            run += 1
            if run >= min_run and (k + 1 == i.size or not rest[k + 1]):
                anchor = k
                break
        else:
            run = 0
    inc = i * dt / (3600.0 * q_cell_ah)
    soc = np.empty(i.size)
    soc[anchor] = zeta_full
    for k in range(anchor, i.size - 1):
        soc[k + 1] = soc[k] - inc[k]
    for k in range(anchor, 0, -1):
        soc[k - 1] = soc[k] + inc[k - 1]
    return soc


def load_hppc_csv(path):
    """Read a cycler log CSV with header ``t_s,I_A,U_V,T_C``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty data file")
    header = [c.strip() for c in rows[0]]
    if header != list(HPPC_CSV_COLUMNS):
        raise ValidationError(f"{path}: expected header {','.join(HPPC_CSV_COLUMNS)}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except (ValueError, IndexError) as exc:
        for n, r in enumerate(rows[1:], start=2):
            try:
                [float(x) for x in r]
                if len(r) != 4:
                    raise ValueError("wrong column count")
            except (ValueError, IndexError):
                raise ValidationError(f"{path}: malformed data at row {n}") from exc
        raise ValidationError(f"{path}: malformed data ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != 4 or data.shape[0] < 2:
        raise ValidationError(f"{path}: need >= 2 rows of t,I,U,T data")
    return data[:, 0], data[:, 1], data[:, 2], data[:, 3]

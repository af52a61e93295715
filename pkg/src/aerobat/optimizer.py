"""Minimum-energy cooling-system design search.

The design vector is (coolant temperature, total flow rate, rated cooling
power); the objective is the battery's internal energy drop over the
mission, subject to the full operating-constraint set.  The simulator is
non-smooth at constraint-triggered early stops, so the search is
derivative-free: Latin hypercube seeding followed by Nelder-Mead descent
on a quadratically penalized objective, with penalty weights escalating
across restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import LimitViolation, ValidationError
from .simulator import SimConfig, check_constraints, simulate

J_PER_KWH = 3.6e6
_INFEASIBLE_BASE = 1e9   # stands in for an unbounded objective in the penalty
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class DesignBounds:
    """Search box for the design vector (SI units, temperatures in K)."""

    t_fl: tuple[float, float]
    vdot_fl: tuple[float, float]
    p_rated: tuple[float, float]

    def __post_init__(self):
        for name in ("t_fl", "vdot_fl", "p_rated"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValidationError(f"{name} bounds must satisfy lower < upper")

    @property
    def lows(self) -> np.ndarray:
        return np.array([self.t_fl[0], self.vdot_fl[0], self.p_rated[0]])

    @property
    def highs(self) -> np.ndarray:
        return np.array([self.t_fl[1], self.vdot_fl[1], self.p_rated[1]])

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lows - 1e-12) and np.all(p <= self.highs + 1e-12))


@dataclass(frozen=True)
class TraceRow:
    eval_id: int
    t_fl: float
    vdot_fl: float
    p_rated: float
    delta_e_b_kwh: float      # inf when the run did not complete
    max_violation: float
    feasible: bool
    stop_reason: str | None


@dataclass
class OptResult:
    p_star: tuple[float, float, float]
    delta_e_b_kwh: float
    feasible: bool
    violations: dict[str, float]
    n_evals: int
    trace: list[TraceRow]


def evaluate_candidate(
    p, base: SimConfig
) -> tuple[float, dict[str, float], str | None]:
    """Objective and constraint report for one design vector.

    Returns (energy drop [kWh], violation magnitudes, stop reason).  A run
    that cannot complete scores +inf but still reports the violations seen,
    so the search has a direction to retreat along; simulator faults never
    propagate as exceptions.
    """
    t_fl, vdot, p_rated = (float(x) for x in p)
    if base.btms is None:
        raise ValidationError("the base configuration must carry a cooling setup")
    design = replace(base.btms.design, t_fl=t_fl, vdot_fl=vdot, p_rated=p_rated)
    try:
        cfg = replace(base, btms=replace(base.btms, design=design))
        result = simulate(cfg)
    except (LimitViolation, ValidationError) as exc:
        kind = exc.kind if isinstance(exc, LimitViolation) else "config"
        mag = exc.magnitude if isinstance(exc, LimitViolation) else 1.0
        return math.inf, {kind: mag}, kind
    violations = check_constraints(result, cfg)
    if not result.completed:
        return math.inf, violations, result.stop_reason
    return result.delta_e_b / J_PER_KWH, violations, None


def _penalized(obj: float, violations: dict[str, float], weight: float) -> float:
    base = obj if math.isfinite(obj) else _INFEASIBLE_BASE
    return base + weight * sum(v * v for v in violations.values())


class _Budget:
    """Evaluation bookkeeping shared by the seeding and descent phases."""

    def __init__(self, fn, bounds: DesignBounds, budget: int):
        self.fn = fn
        self.bounds = bounds
        self.budget = budget
        self.trace: list[TraceRow] = []
        self.violations: list[dict[str, float]] = []

    @property
    def exhausted(self) -> bool:
        return len(self.trace) >= self.budget

    def __call__(self, p) -> tuple[float, dict[str, float]]:
        p = np.clip(np.asarray(p, dtype=float), self.bounds.lows, self.bounds.highs)
        out = self.fn(p)
        obj, violations = out[0], out[1]
        reason = out[2] if len(out) > 2 else None
        feasible = math.isfinite(obj) and all(v <= _FEAS_TOL for v in violations.values())
        self.trace.append(
            TraceRow(
                eval_id=len(self.trace),
                t_fl=float(p[0]),
                vdot_fl=float(p[1]),
                p_rated=float(p[2]),
                delta_e_b_kwh=float(obj),
                max_violation=max(violations.values(), default=0.0),
                feasible=feasible,
                stop_reason=reason,
            )
        )
        return obj, violations


def _latin_hypercube(rng: np.random.Generator, bounds: DesignBounds, n: int) -> np.ndarray:
    pts = np.empty((n, 3))
    for axis in range(3):
        strata = (rng.permutation(n) + rng.random(n)) / n
        pts[:, axis] = bounds.lows[axis] + strata * (bounds.highs[axis] - bounds.lows[axis])
    return pts


def _nelder_mead(budget: _Budget, x0: np.ndarray, weight: float, span: np.ndarray):
    """Bounded simplex descent on the penalized objective; returns best (x, f)."""

    def f(x):
        obj, viol = budget(x)
        return _penalized(obj, viol, weight)

    n = x0.size
    simplex = [np.clip(x0, budget.bounds.lows, budget.bounds.highs)]
    for axis in range(n):
        step = 0.10 * span[axis]
        x = simplex[0].copy()
        x[axis] = x[axis] - step if x[axis] + step > budget.bounds.highs[axis] else x[axis] + step
        simplex.append(np.clip(x, budget.bounds.lows, budget.bounds.highs))
    values = []
    for x in simplex:
        if budget.exhausted:
            return
        values.append(f(x))

    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    while not budget.exhausted:
        order = np.argsort(values)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        spread = max(np.max(np.abs(simplex[i] - simplex[0]) / span) for i in range(1, n + 1))
        if spread < 1e-10 or values[-1] - values[0] < 1e-12:
            return
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = f(xr)
        if fr < values[0] and not budget.exhausted:
            xe = centroid + gamma * (centroid - simplex[-1])
            fe = f(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        elif not budget.exhausted:
            xc = centroid + rho * (simplex[-1] - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    if budget.exhausted:
                        return
                    simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                    values[i] = f(simplex[i])


def optimize(
    bounds: DesignBounds,
    base: SimConfig | None,
    budget: int = 300,
    seed: int = 0,
    eval_fn=None,
    restarts: int = 3,
) -> OptResult:
    """Two-phase constrained search over the design box.

    Latin hypercube samples seed the trace; Nelder-Mead then descends from
    the best seed on objective + weight * sum(violation^2), restarting with
    a tenfold weight (up to ``restarts`` times) while the incumbent remains
    infeasible.  A fixed seed makes the whole trace reproducible.
    """
    if budget < 30:
        raise ValidationError("optimization budget must be at least 30 evaluations")
    if eval_fn is None:
        if base is None:
            raise ValidationError("need a base configuration or an eval_fn")
        eval_fn = lambda p: evaluate_candidate(p, base)  # noqa: E731

    rng = np.random.default_rng(seed)
    tracker = _Budget(eval_fn, bounds, budget)
    span = bounds.highs - bounds.lows

    n_seed = max(8, min(budget // 5, 40))
    for p in _latin_hypercube(rng, bounds, n_seed):
        if tracker.exhausted:
            break
        tracker(p)

    weight = 1e3
    for _ in range(max(restarts, 1)):
        if tracker.exhausted:
            break
        rows = tracker.trace
        start = min(
            rows,
            key=lambda r: _penalized(
                r.delta_e_b_kwh, {"": r.max_violation}, weight
            ),
        )
        x0 = np.array([start.t_fl, start.vdot_fl, start.p_rated])
        _nelder_mead(tracker, x0, weight, span)
        if any(r.feasible for r in tracker.trace):
            break
        weight *= 10.0

    feasible_rows = [r for r in tracker.trace if r.feasible]
    if feasible_rows:
        best = min(feasible_rows, key=lambda r: r.delta_e_b_kwh)
        feasible = True
    else:
        best = min(tracker.trace, key=lambda r: r.max_violation)
        feasible = False
    p_star = (best.t_fl, best.vdot_fl, best.p_rated)
    out = eval_fn(p_star)
    return OptResult(
        p_star=p_star,
        delta_e_b_kwh=best.delta_e_b_kwh,
        feasible=feasible,
        violations=out[1],
        n_evals=len(tracker.trace),
        trace=tracker.trace,
    )

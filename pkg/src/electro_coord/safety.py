"""Projection safety layer.

Each unit gets a current box from ramp, voltage, current and power limits,
intersected with the nonnegative region of its CBF cubic. The projection
then finds the point closest to the feedback-optimization reference subject
to the cluster power cap (sum of unit powers <= available wind).
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .cbf import AdmissibleSet, CbfCoefficients, cbf_coefficients, nonneg_region
from .config import ElectrolyzerParams
from .plant import ElectrolyzerState, resistance

MAX_BISECT = 64
# interval combinations tried exactly before falling back to the u_minus pieces
MAX_COMBOS = 64


class EmptyAdmissibleSetError(RuntimeError):
    """A unit has no admissible current; no recovery policy is defined."""


@dataclass(frozen=True, slots=True)
class BoxBounds:
    lower: float
    upper: float
    ramp_cap: float
    voltage_cap: float
    current_cap: float
    power_cap: float

    @property
    def empty(self) -> bool:
        return self.upper < self.lower


@dataclass(frozen=True)
class FeasibilityReport:
    per_unit_nonempty: tuple[bool, ...]
    u_minus: tuple[float, ...]
    p_min_reach: float
    p_wind: float
    proposition1_holds: bool
    relaxed: bool


@dataclass(frozen=True)
class ProjectionResult:
    u: list[float]
    objective: float
    coupling_active: bool
    relaxed: bool
    iterations: int
    combos: int
    restricted: bool


def box_bounds(p: ElectrolyzerParams, state: ElectrolyzerState, u_prev: float,
               dt: float) -> BoxBounds:
    r = resistance(p, state.t_ele)
    ramp = p.delta_i_max * dt
    lower = max(0.0, u_prev - ramp)
    ramp_cap = u_prev + ramp
    v_cap = (p.u_max - p.u_rev) / r
    i_cap = (p.u_max - p.u_rev) / r
    p_max = p.u_max * i_cap
    # nonnegative root of r*x^2 + u_rev*x - p_max, written without cancellation
    p_cap = 2.0 * p_max / (p.u_rev + math.sqrt(p.u_rev * p.u_rev + 4.0 * r * p_max))
    upper = min(ramp_cap, v_cap, i_cap, p_cap)
    return BoxBounds(lower, upper, ramp_cap, v_cap, i_cap, p_cap)


def admissible_set(p: ElectrolyzerParams, state: ElectrolyzerState, u_prev: float,
                   t_a: float, alpha: float, dt: float, tol: float = 1e-9
                   ) -> tuple[BoxBounds, CbfCoefficients, AdmissibleSet]:
    box = box_bounds(p, state, u_prev, dt)
    coeffs = cbf_coefficients(p, state, t_a, alpha, dt)
    if box.empty:
        return box, coeffs, AdmissibleSet(())
    return box, coeffs, nonneg_region(coeffs, (box.lower, box.upper), tol)


def _unit_power(p: ElectrolyzerParams, t: float, u: float) -> float:
    return (p.u_rev + (p.rho1 + p.rho2 * t) * u) * u


def feasibility_check(sets: Sequence[AdmissibleSet], params: Sequence[ElectrolyzerParams],
                      states: Sequence[ElectrolyzerState], p_wind: float) -> FeasibilityReport:
    nonempty = tuple(not s.empty for s in sets)
    u_minus = tuple(s.u_minus if not s.empty else math.nan for s in sets)
    reach = sum(_unit_power(p, st.t_ele, um)
                for p, st, um, ok in zip(params, states, u_minus, nonempty) if ok)
    holds = all(nonempty) and reach <= p_wind
    return FeasibilityReport(nonempty, u_minus, reach, p_wind, holds, not holds)


def objective(u: Sequence[float], u_des: Sequence[float]) -> float:
    return 0.5 * sum((a - b) ** 2 for a, b in zip(u, u_des))


def _solve_pieces(u_des, pieces, res, urev, p_wind, tol_power):
    """Exact projection onto a product of intervals under the power cap.

    Each unit power urev*u + res*u^2 is convex, so the problem is convex and
    the KKT point for multiplier lam is the clamp of the per-unit stationary
    point; total power is nonincreasing in lam, which is found by bisection.
    Returns (u, iterations) or None when even the lower ends exceed the cap.
    """
    n = len(u_des)

    def alloc(lam: float) -> tuple[list[float], float]:
        out = []
        total = 0.0
        for k in range(n):
            lo, hi = pieces[k]
            x = (u_des[k] - lam * urev[k]) / (1.0 + 2.0 * lam * res[k])
            x = lo if x < lo else hi if x > hi else x
            out.append(x)
            total += (urev[k] + res[k] * x) * x
        return out, total

    floor = sum((urev[k] + res[k] * pieces[k][0]) * pieces[k][0] for k in range(n))
    if floor > p_wind:
        return None
    u, g = alloc(0.0)
    if g <= p_wind:
        return u, 0
    lam_lo, lam_hi = 0.0, 1e-3
    its = 0
    u_hi, g_hi = alloc(lam_hi)
    while g_hi > p_wind:
        lam_lo, lam_hi = lam_hi, lam_hi * 4.0
        u_hi, g_hi = alloc(lam_hi)
        its += 1
        if its > 200:
            # every unit is pinned to its lower end
            return [pc[0] for pc in pieces], its
    for _ in range(MAX_BISECT):
        if p_wind - g_hi <= tol_power:
            break
        lam = 0.5 * (lam_lo + lam_hi)
        if lam <= lam_lo or lam >= lam_hi:
            break
        u_mid, g_mid = alloc(lam)
        its += 1
        if g_mid > p_wind:
            lam_lo = lam
        else:
            lam_hi, u_hi, g_hi = lam, u_mid, g_mid
    return u_hi, its


def project(u_des: Sequence[float], sets: Sequence[AdmissibleSet],
            params: Sequence[ElectrolyzerParams], states: Sequence[ElectrolyzerState],
            p_wind: float, relaxed: bool = False, tol_power: float | None = None,
            max_combos: int = MAX_COMBOS) -> ProjectionResult:
    """Closest admissible input to ``u_des``.

    Stage 1 projects every unit onto its own admissible set. If the summed
    power respects the wind cap (or the cap is relaxed) that is optimal.
    Otherwise every combination of admissible intervals is solved exactly
    and the best kept; beyond ``max_combos`` combinations only the intervals
    holding each unit's minimum admissible current are used.
    """
    for k, s in enumerate(sets):
        if s.empty:
            raise EmptyAdmissibleSetError(f"unit {k} has an empty admissible set")
    u1 = [s.nearest(d) for s, d in zip(sets, u_des)]
    if relaxed:
        return ProjectionResult(u1, objective(u1, u_des), False, True, 0, 0, False)

    res = [p.rho1 + p.rho2 * st.t_ele for p, st in zip(params, states)]
    urev = [p.u_rev for p in params]
    total = sum((urev[k] + res[k] * u1[k]) * u1[k] for k in range(len(u1)))
    if total <= p_wind:
        return ProjectionResult(u1, objective(u1, u_des), False, False, 0, 0, False)

    if tol_power is None:
        p_ref = sum((urev[k] + res[k] * s.u_max) * s.u_max for k, s in enumerate(sets))
        tol_power = 1e-9 * max(p_ref, 1.0)

    n_combos = math.prod(len(s.intervals) for s in sets)
    restricted = n_combos > max_combos
    if restricted:
        choices = [(s.intervals[0],) for s in sets]
    else:
        choices = [s.intervals for s in sets]

    best = None
    best_obj = math.inf
    its = 0
    tried = 0
    for pieces in itertools.product(*choices):
        tried += 1
        sol = _solve_pieces(u_des, pieces, res, urev, p_wind, tol_power)
        if sol is None:
            continue
        u, k = sol
        its += k
        obj = objective(u, u_des)
        if obj < best_obj:
            best, best_obj = u, obj
    if best is None:
        raise EmptyAdmissibleSetError(
            "no admissible input satisfies the power cap; the feasibility check should have relaxed it")
    return ProjectionResult(best, best_obj, True, False, its, tried, restricted)


def _grid(intervals: tuple[tuple[float, float], ...], step: float) -> np.ndarray:
    parts = []
    for lo, hi in intervals:
        n = int(math.floor((hi - lo) / step))
        parts.append(lo + step * np.arange(n + 1))
        parts.append(np.array([hi]))
    return np.unique(np.concatenate(parts))


def brute_force_project(u_des: Sequence[float], sets: Sequence[AdmissibleSet],
                        params: Sequence[ElectrolyzerParams],
                        states: Sequence[ElectrolyzerState], p_wind: float,
                        relaxed: bool = False, grid_step: float = 1e-3) -> list[float]:
    """Test oracle: exhaustive grid over all units but the last, whose best
    response to the remaining power budget is computed in closed form.

    Intended for at most three units.
    """
    n = len(u_des)
    if n > 3:
        raise ValueError("brute force oracle is limited to 3 units")
    if any(s.empty for s in sets):
        raise EmptyAdmissibleSetError("empty admissible set")
    res = np.array([p.rho1 + p.rho2 * st.t_ele for p, st in zip(params, states)])
    urev = np.array([p.u_rev for p in params])
    d = np.asarray(u_des, dtype=float)

    if n == 1:
        heads = [np.zeros(1)]
    else:
        axes = [_grid(s.intervals, grid_step) for s in sets[:-1]]
        heads = [a.ravel() for a in np.meshgrid(*axes, indexing="ij")]
    head_cost = np.zeros_like(heads[0])
    head_power = np.zeros_like(heads[0])
    for k in range(n - 1):
        head_cost += 0.5 * (heads[k] - d[k]) ** 2
        head_power += (urev[k] + res[k] * heads[k]) * heads[k]

    # last unit: nearest point of U_n intersected with [0, cap]
    budget = np.full_like(head_power, np.inf) if relaxed else p_wind - head_power
    r, ur = res[-1], urev[-1]
    with np.errstate(invalid="ignore"):
        cap = np.where(budget >= 0,
                       2.0 * budget / (ur + np.sqrt(ur * ur + 4.0 * r * np.maximum(budget, 0.0))),
                       -np.inf)
    cap = np.where(np.isinf(budget), np.inf, cap)
    best_last = np.full_like(head_power, np.nan)
    best_cost = np.full_like(head_power, np.inf)
    for lo, hi in sets[-1].intervals:
        top = np.minimum(hi, cap)
        ok = top >= lo
        x = np.clip(d[-1], lo, top)
        c = 0.5 * (x - d[-1]) ** 2
        better = ok & (c < best_cost)
        best_cost = np.where(better, c, best_cost)
        best_last = np.where(better, x, best_last)
    total = head_cost + best_cost
    if not np.isfinite(total).any():
        raise EmptyAdmissibleSetError("no grid point satisfies the power cap")
    j = int(np.argmin(total))
    return [float(h[j]) for h in heads[: n - 1]] + [float(best_last[j])]

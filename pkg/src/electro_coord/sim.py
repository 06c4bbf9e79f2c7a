"""Closed-loop simulation: FO reference, safety projection, plant step."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import cbf, fo, plant
from .config import SimConfig, config_from_snapshot
from .plant import ElectrolyzerState
from .safety import EmptyAdmissibleSetError, admissible_set, feasibility_check, project
from .scenarios import WindProfile, resample

TRACE_FORMAT = "electro-coord-trace/1"


class UnsafeInitialStateError(ValueError):
    pass


@dataclass(frozen=True)
class StepLog:
    step_index: int
    p_wind: float
    u_applied: tuple[float, ...]
    p_units: tuple[float, ...]
    p_total: float
    storage_power: float
    hto: tuple[float, ...]
    temps: tuple[float, ...]
    feasible: bool
    relaxed: bool
    deviation_norm: float
    solve_time: float


@dataclass
class Trace:
    """Per-step arrays of a closed-loop run.

    ``hto`` and ``temps`` hold the plant state after the step's input has
    been applied; the state before step 0 is ``initial_states``. ``mismatch``
    is the steady-map power mismatch the FO layer saw at the start of the
    step.
    """

    config: SimConfig
    initial_states: tuple[ElectrolyzerState, ...]
    initial_u: tuple[float, ...]
    p_wind: np.ndarray
    u: np.ndarray
    u_des: np.ndarray
    p_units: np.ndarray
    hto: np.ndarray
    temps: np.ndarray
    mismatch: np.ndarray
    feasible: np.ndarray
    relaxed: np.ndarray
    coupling_active: np.ndarray
    deviation: np.ndarray
    p_min_reach: np.ndarray
    solve_time: np.ndarray
    terminal_states: tuple[ElectrolyzerState, ...] = ()
    clamp_count: int = 0
    restricted_count: int = 0
    label: str = ""

    def __len__(self) -> int:
        return len(self.p_wind)

    @property
    def n_ele(self) -> int:
        return self.u.shape[1]

    @property
    def dt(self) -> float:
        return self.config.controller.dt

    @property
    def p_total(self) -> np.ndarray:
        return self.p_units.sum(axis=1)

    @property
    def storage_power(self) -> np.ndarray:
        return np.maximum(0.0, self.p_total - self.p_wind)

    @property
    def hto_before(self) -> np.ndarray:
        first = np.array([[plant.hto(p, s) for p, s in zip(self.config.electrolyzers,
                                                              self.initial_states)]])
        return np.vstack([first, self.hto[:-1]])

    def step(self, k: int) -> StepLog:
        p_total = float(self.p_units[k].sum())
        return StepLog(
            step_index=k,
            p_wind=float(self.p_wind[k]),
            u_applied=tuple(self.u[k].tolist()),
            p_units=tuple(self.p_units[k].tolist()),
            p_total=p_total,
            storage_power=storage_power(p_total, float(self.p_wind[k])),
            hto=tuple(self.hto[k].tolist()),
            temps=tuple(self.temps[k].tolist()),
            feasible=bool(self.feasible[k]),
            relaxed=bool(self.relaxed[k]),
            deviation_norm=float(self.deviation[k]),
            solve_time=float(self.solve_time[k]),
        )


def storage_power(p_total: float, p_wind: float) -> float:
    """Power the storage unit must supply, in W."""
    return max(0.0, p_total - p_wind)


def initial_states(config: SimConfig) -> tuple[ElectrolyzerState, ...]:
    return tuple(ElectrolyzerState(t, s.n_an, s.n_sep_l, s.n_sep_g)
                 for t, s in zip(config.initial_temps, config.initial_states))


def run(config: SimConfig, wind: WindProfile, *, tol: float = 1e-9) -> Trace:
    """Run the layered controller against the plant for ``horizon_steps``."""
    ctrl = config.controller
    dt, alpha, t_a = ctrl.dt, ctrl.alpha, config.ambient_temp
    params = config.electrolyzers
    n = config.n_ele
    steps = config.horizon_steps
    wind = resample(wind, dt)
    if len(wind) < steps:
        raise ValueError(f"wind profile has {len(wind)} samples, horizon needs {steps}")

    states = list(initial_states(config))
    for k, (p, s) in enumerate(zip(params, states)):
        if cbf.safe_value(p, s) < 0:
            raise UnsafeInitialStateError(f"unit {k} starts outside the HTO safe set")
    u = list(config.initial_currents) if config.initial_currents else [0.0] * n
    init_states, init_u = tuple(states), tuple(u)

    p_wind = np.array(wind.samples[:steps], dtype=float)
    shape = (steps, n)
    log_u, log_des = np.empty(shape), np.empty(shape)
    log_p, log_hto, log_t = np.empty(shape), np.empty(shape), np.empty(shape)
    mismatch, deviation = np.empty(steps), np.empty(steps)
    reach, solve = np.empty(steps), np.empty(steps)
    feasible = np.empty(steps, dtype=bool)
    relaxed = np.empty(steps, dtype=bool)
    coupling = np.empty(steps, dtype=bool)
    clamps = restricted = 0

    euler = plant.euler_update
    hto = plant.hto
    perf = time.perf_counter
    for t in range(steps):
        w = float(p_wind[t])
        t0 = perf()
        e = fo.power_mismatch(u, params, t_a, w)
        u_des = fo.fo_update(u, params, t_a, w, ctrl)
        sets = [admissible_set(p, s, ui, t_a, alpha, dt, tol)[2]
                for p, s, ui in zip(params, states, u)]
        report = feasibility_check(sets, params, states, w)
        if not all(report.per_unit_nonempty):
            bad = [k for k, ok in enumerate(report.per_unit_nonempty) if not ok]
            raise EmptyAdmissibleSetError(f"step {t}: units {bad} have no admissible current")
        result = project(u_des, sets, params, states, w, relaxed=report.relaxed)
        solve[t] = perf() - t0

        u_new = result.u
        for k in range(n):
            p, s, uk = params[k], states[k], u_new[k]
            log_p[t, k] = (p.u_rev + (p.rho1 + p.rho2 * s.t_ele) * uk) * uk
            s_next, clamped = euler(p, s, uk, t_a, dt)
            clamps += clamped
            states[k] = s_next
            log_hto[t, k] = hto(p, s_next)
            log_t[t, k] = s_next.t_ele
        log_u[t] = u_new
        log_des[t] = u_des
        mismatch[t] = e
        deviation[t] = math.sqrt(sum((a - b) ** 2 for a, b in zip(u_new, u_des)))
        reach[t] = report.p_min_reach
        feasible[t] = report.proposition1_holds
        relaxed[t] = report.relaxed
        coupling[t] = result.coupling_active
        restricted += result.restricted
        u = u_new

    return Trace(
        config=config, initial_states=init_states, initial_u=init_u, p_wind=p_wind,
        u=log_u, u_des=log_des, p_units=log_p, hto=log_hto, temps=log_t,
        mismatch=mismatch, feasible=feasible, relaxed=relaxed, coupling_active=coupling,
        deviation=deviation, p_min_reach=reach, solve_time=solve,
        terminal_states=tuple(states), clamp_count=clamps, restricted_count=restricted,
        label=wind.label,
    )


# ---------------------------------------------------------------- export

def _unit_cols(prefix: str, n: int) -> list[str]:
    return [f"{prefix}_{k + 1}" for k in range(n)]


def trace_csv_header(n: int) -> list[str]:
    return (["step", "p_wind_w", "p_total_w", "storage_w", "mismatch_w", "feasible",
             "relaxed", "coupling_active", "deviation_a", "p_min_reach_w"]
            + _unit_cols("u_a", n) + _unit_cols("u_des_a", n) + _unit_cols("p_w", n)
            + _unit_cols("hto", n) + _unit_cols("temp_c", n))


def write_trace_csv(trace: Trace, path: str | Path) -> None:
    """One row per step; wall-clock solve times are kept out so the file is
    reproducible (see ``write_timing_csv``)."""
    n = trace.n_ele
    p_total = trace.p_total
    store = trace.storage_power
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_csv_header(n))
        for t in range(len(trace)):
            w.writerow(
                [t, repr(float(trace.p_wind[t])), repr(float(p_total[t])), repr(float(store[t])),
                 repr(float(trace.mismatch[t])), int(trace.feasible[t]), int(trace.relaxed[t]),
                 int(trace.coupling_active[t]), repr(float(trace.deviation[t])),
                 repr(float(trace.p_min_reach[t]))]
                + [repr(x) for x in trace.u[t].tolist()]
                + [repr(x) for x in trace.u_des[t].tolist()]
                + [repr(x) for x in trace.p_units[t].tolist()]
                + [repr(x) for x in trace.hto[t].tolist()]
                + [repr(x) for x in trace.temps[t].tolist()])


def write_timing_csv(trace: Trace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "solve_time_s"])
        for t, s in enumerate(trace.solve_time.tolist()):
            w.writerow([t, repr(s)])


def read_timing_csv(path: str | Path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1].copy() if data.size else np.empty(0)


def trace_to_dict(trace: Trace) -> dict:
    return {
        "format": TRACE_FORMAT,
        "label": trace.label,
        "config": asdict(trace.config),
        "initial_states": [asdict(s) for s in trace.initial_states],
        "initial_u": list(trace.initial_u),
        "terminal_states": [asdict(s) for s in trace.terminal_states],
        "clamp_count": trace.clamp_count,
        "restricted_count": trace.restricted_count,
        "p_wind": trace.p_wind.tolist(),
        "u": trace.u.tolist(),
        "u_des": trace.u_des.tolist(),
        "p_units": trace.p_units.tolist(),
        "hto": trace.hto.tolist(),
        "temps": trace.temps.tolist(),
        "mismatch": trace.mismatch.tolist(),
        "feasible": trace.feasible.tolist(),
        "relaxed": trace.relaxed.tolist(),
        "coupling_active": trace.coupling_active.tolist(),
        "deviation": trace.deviation.tolist(),
        "p_min_reach": trace.p_min_reach.tolist(),
    }


def write_trace_json(trace: Trace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(trace_to_dict(trace)))


class TraceFormatError(ValueError):
    pass


def trace_from_dict(raw: dict, solve_time: np.ndarray | None = None) -> Trace:
    if not isinstance(raw, dict) or raw.get("format") != TRACE_FORMAT:
        raise TraceFormatError("not an electro-coord trace")
    try:
        config = config_from_snapshot(raw["config"])
        n_steps = len(raw["p_wind"])
        arr = {key: np.asarray(raw[key], dtype=float)
               for key in ("p_wind", "u", "u_des", "p_units", "hto", "temps",
                           "mismatch", "deviation", "p_min_reach")}
        flags = {key: np.asarray(raw[key], dtype=bool)
                 for key in ("feasible", "relaxed", "coupling_active")}
        if solve_time is None:
            solve_time = np.full(n_steps, np.nan)
        trace = Trace(
            config=config,
            initial_states=tuple(ElectrolyzerState(**s) for s in raw["initial_states"]),
            initial_u=tuple(raw["initial_u"]),
            solve_time=np.asarray(solve_time, dtype=float),
            terminal_states=tuple(ElectrolyzerState(**s) for s in raw["terminal_states"]),
            clamp_count=int(raw["clamp_count"]),
            restricted_count=int(raw["restricted_count"]),
            label=raw.get("label", ""),
            **arr, **flags,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"malformed trace: {exc}") from exc
    for name in ("u", "u_des", "p_units", "hto", "temps"):
        if getattr(trace, name).shape != (n_steps, config.n_ele):
            raise TraceFormatError(f"malformed trace: {name} has wrong shape")
    if len(trace.solve_time) != n_steps:
        raise TraceFormatError("timing length does not match the trace")
    return trace


def read_trace_json(path: str | Path, timing_path: str | Path | None = None) -> Trace:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TraceFormatError(f"cannot read trace {path}: {exc}") from exc
    timing = None
    if timing_path is None:
        candidate = path.with_name("timing.csv")
        timing_path = candidate if candidate.is_file() else None
    if timing_path is not None:
        timing = read_timing_csv(timing_path)
    return trace_from_dict(raw, timing)

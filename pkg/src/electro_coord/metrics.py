"""Run KPIs, contraction diagnostics and parameter sweeps.

Everything computed from plant quantities is a pure function of the trace
and reproducible bit for bit. Wall-clock solve times are not, so they are
reported through separate records and files.
"""
from __future__ import annotations

import csv
import json
import math
import os
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import fo
from .config import SimConfig
from .scenarios import WindProfile
from .sim import Trace, run

HTO_SLACK = 1e-9
THREADS_ENV = "ELECTRO_COORD_THREADS"


@dataclass(frozen=True)
class SolveTimeStats:
    avg: float
    p95: float
    max: float


@dataclass(frozen=True)
class RunMetrics:
    energy_utilization: float
    storage_energy: float
    hto_peak: float
    hto_violations: int
    relaxed_step_count: int
    coupling_step_count: int
    steps: int
    solve_time_avg: float
    solve_time_p95: float
    solve_time_max: float

    def reproducible_dict(self) -> dict:
        """Fields that do not depend on wall-clock timing."""
        d = asdict(self)
        for key in ("solve_time_avg", "solve_time_p95", "solve_time_max"):
            d.pop(key)
        return d

    def timing_dict(self) -> dict:
        return {"solve_time_avg": self.solve_time_avg, "solve_time_p95": self.solve_time_p95,
                "solve_time_max": self.solve_time_max}


@dataclass(frozen=True)
class ContractionDiagnostics:
    q_hat: float
    omega_bar: float
    e_f_bar: float
    l_h: float
    uub_bound: float
    eligible_steps: int
    noise_floor: float


def energy_utilization(trace: Trace) -> float:
    """Share of available wind energy consumed by the cluster."""
    wind = float(np.sum(trace.p_wind))
    if wind <= 0.0:
        return 1.0
    return float(np.sum(np.minimum(trace.p_total, trace.p_wind))) / wind


def storage_energy(trace: Trace) -> float:
    """Energy drawn from storage, in Wh."""
    return float(np.sum(trace.storage_power)) * trace.dt / 3600.0


def solve_time_stats(times: Sequence[float] | np.ndarray) -> SolveTimeStats:
    """Mean, nearest-rank 95th percentile and maximum."""
    x = np.sort(np.asarray(times, dtype=float))
    if x.size == 0:
        return SolveTimeStats(math.nan, math.nan, math.nan)
    rank = max(1, math.ceil(0.95 * x.size))
    return SolveTimeStats(float(x.mean()), float(x[rank - 1]), float(x[-1]))


def hto_violations(trace: Trace, slack: float = HTO_SLACK) -> int:
    limits = np.array([p.hto_max for p in trace.config.electrolyzers])
    return int(np.count_nonzero(trace.hto > limits + slack))


def run_metrics(trace: Trace) -> RunMetrics:
    st = solve_time_stats(trace.solve_time)
    return RunMetrics(
        energy_utilization=energy_utilization(trace),
        storage_energy=storage_energy(trace),
        hto_peak=float(trace.hto.max()) if trace.hto.size else 0.0,
        hto_violations=hto_violations(trace),
        relaxed_step_count=int(np.count_nonzero(trace.relaxed)),
        coupling_step_count=int(np.count_nonzero(trace.coupling_active)),
        steps=len(trace),
        solve_time_avg=st.avg,
        solve_time_p95=st.p95,
        solve_time_max=st.max,
    )


# ----------------------------------------------------------- contraction

def lipschitz_bound(trace: Trace) -> float:
    """Largest summed slope of the steady power map met along the trace.

    The slope grows with current, so evaluating at the larger of the applied
    and reference currents bounds it on the segment joining them.
    """
    cfg = trace.config
    upper = np.maximum(trace.u, trace.u_des)
    if not upper.size:
        return 0.0
    worst = upper.max(axis=0)
    return float(sum(fo.steady_power_gradient(p, float(x), cfg.ambient_temp)
                     for p, x in zip(cfg.electrolyzers, worst)))


def contraction_diagnostics(trace: Trace, config: SimConfig | None = None,
                            noise_floor: float | None = None) -> ContractionDiagnostics:
    """Empirical quantities of the ultimate mismatch bound.

    ``q_hat`` is the worst one-step ratio (|e(t+1)| - |dw(t)|)/|e(t)| over
    steps where the projection left the reference untouched, the wind step
    was no larger than its median, and |e(t)| exceeded the noise floor.
    """
    config = config or trace.config
    e = np.abs(trace.mismatch)
    wind = trace.p_wind
    dw = np.abs(np.diff(wind))
    omega_bar = float(dw.max()) if dw.size else 0.0
    if noise_floor is None:
        scale = max(1.0, float(np.max(wind)) if wind.size else 1.0)
        noise_floor = 1e-8 * scale
    e_f_bar = float(trace.deviation.max()) if trace.deviation.size else 0.0
    l_h = lipschitz_bound(trace)

    q_hat = 0.0
    eligible = 0
    if len(e) > 1:
        med = float(np.median(dw))
        untouched = (~trace.relaxed[:-1]) & (~trace.coupling_active[:-1]) & (trace.deviation[:-1] == 0.0)
        mask = untouched & (dw <= med) & (e[:-1] > noise_floor)
        eligible = int(np.count_nonzero(mask))
        if eligible:
            ratios = (e[1:][mask] - dw[mask]) / e[:-1][mask]
            q_hat = float(max(0.0, ratios.max()))
    bound = math.inf if q_hat >= 1.0 else (omega_bar + l_h * e_f_bar) / (1.0 - q_hat)
    return ContractionDiagnostics(q_hat, omega_bar, e_f_bar, l_h, bound, eligible, noise_floor)


def tail_max_mismatch(trace: Trace, tail_fraction: float = 0.5) -> float:
    n = len(trace)
    start = min(n - 1, int(n * (1.0 - tail_fraction)))
    return float(np.max(np.abs(trace.mismatch[start:]))) if n else 0.0


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepRow:
    value: float
    metrics: RunMetrics


def worker_count(jobs: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError:
            pass
    return max(1, min(cap, jobs))


def _run_one(args: tuple[SimConfig, WindProfile]) -> RunMetrics:
    cfg, wind = args
    return run_metrics(run(cfg, wind))


def _sweep(configs: list[SimConfig], wind: WindProfile, workers: int | None) -> list[RunMetrics]:
    workers = worker_count(len(configs)) if workers is None else workers
    jobs = [(c, wind) for c in configs]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def sweep_gain(config: SimConfig, wind: WindProfile, factors: Sequence[float],
               workers: int | None = None) -> list[SweepRow]:
    """One run per factor with the FO step size scaled by that factor."""
    if not factors:
        raise ValueError("no gain factors given")
    eps = config.controller.epsilon
    cfgs = [config.with_controller(epsilon=eps * f) for f in factors]
    return [SweepRow(float(f), m) for f, m in zip(factors, _sweep(cfgs, wind, workers))]


def sweep_alpha(config: SimConfig, wind: WindProfile, alphas: Sequence[float],
                workers: int | None = None) -> list[SweepRow]:
    """One run per barrier decay rate."""
    if not alphas:
        raise ValueError("no alpha values given")
    for a in alphas:
        if not 0.0 < a <= 1.0:
            raise ValueError(f"alpha {a} outside (0, 1]")
    cfgs = [config.with_controller(alpha=a) for a in alphas]
    return [SweepRow(float(a), m) for a, m in zip(alphas, _sweep(cfgs, wind, workers))]


# ---------------------------------------------------------------- export

GAIN_COLUMNS = ("factor", "energy_utilization", "storage_energy_wh", "relaxed_steps", "hto_violations")
ALPHA_COLUMNS = ("alpha", "storage_energy_wh", "energy_utilization", "relaxed_steps", "hto_violations")
TIMING_COLUMNS = ("solve_time_avg_s", "solve_time_p95_s", "solve_time_max_s")


def _sweep_record(row: SweepRow, kind: str) -> list:
    m = row.metrics
    if kind == "gain":
        return [repr(row.value), repr(m.energy_utilization), repr(m.storage_energy),
                m.relaxed_step_count, m.hto_violations]
    return [repr(row.value), repr(m.storage_energy), repr(m.energy_utilization),
            m.relaxed_step_count, m.hto_violations]


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path, kind: str) -> None:
    """Reproducible sweep table; ``kind`` is ``gain`` or ``alpha``."""
    if kind not in ("gain", "alpha"):
        raise ValueError(f"unknown sweep kind {kind!r}")
    header = GAIN_COLUMNS if kind == "gain" else ALPHA_COLUMNS
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(_sweep_record(r, kind))


def write_sweep_timing_csv(rows: Sequence[SweepRow], path: str | Path, kind: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((("factor",) if kind == "gain" else ("alpha",)) + TIMING_COLUMNS)
        for r in rows:
            m = r.metrics
            w.writerow([repr(r.value), repr(m.solve_time_avg), repr(m.solve_time_p95),
                        repr(m.solve_time_max)])


def write_metrics_json(m: RunMetrics, path: str | Path,
                       diagnostics: ContractionDiagnostics | None = None) -> None:
    d = m.reproducible_dict()
    if diagnostics is not None:
        d["contraction"] = {k: (None if isinstance(v, float) and math.isinf(v) else v)
                            for k, v in asdict(diagnostics).items()}
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")


def write_timing_json(m: RunMetrics, path: str | Path) -> None:
    Path(path).write_text(json.dumps(m.timing_dict(), indent=2, sort_keys=True) + "\n")

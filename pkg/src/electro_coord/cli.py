"""Command-line entry point: ``electro-coord <command> [flags]``.

Exit codes: 0 success, 1 safety or assertion failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import metrics, sim
from .calibration import calibrate_crossover
from .config import ConfigError, ElectrolyzerParams, SimConfig, cluster_rating, load_config
from .safety import EmptyAdmissibleSetError
from .scenarios import (
    WindDataError,
    WindProfile,
    export_representative_days,
    load_representative_days,
    load_wind_csv,
    representative_days,
    scale_profile,
    slice_day,
)

EXIT_OK, EXIT_UNSAFE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _is_manifest(path: Path) -> bool:
    return path.is_dir() or path.suffix == ".json"


def resolve_wind(config: SimConfig, wind_path: str | None, day: int | None,
                 scale: bool = True) -> WindProfile:
    """Load the scenario for a run and scale it to the cluster rating.

    ``wind_path`` may be a wind CSV (``day`` then picks a calendar day) or a
    representative-day manifest (``day`` picks a representative day). The
    scaling reference is the peak of the whole source, so days keep their
    relative level.
    """
    src = wind_path or config.wind_source.path
    if src is None:
        raise UsageError("no wind data: pass --wind or set wind_source.path in the config")
    path = Path(src)
    if _is_manifest(path):
        rep = load_representative_days(path)
        index = 0 if day is None else day
        if not 0 <= index < rep.k:
            raise UsageError(f"--day {index} outside 0..{rep.k - 1}")
        profile, ref = rep.days[index], rep.source_peak_w
    else:
        full = load_wind_csv(path)
        ref = float(full.samples.max())
        profile = full if day is None else slice_day(full, day)
    if not scale:
        return profile
    ws = config.wind_source
    target = ws.target_peak_w if ws.target_peak_w is not None else cluster_rating(config)
    reference = ws.reference_peak_w if ws.reference_peak_w is not None else ref
    return scale_profile(profile, target, reference_peak=reference)


def _parse_values(text: str) -> list[float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if not parts:
        raise UsageError("empty value list")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"bad value list {text!r}") from exc


# ----------------------------------------------------------------- commands

def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.horizon is not None:
        config = replace(config, horizon_steps=args.horizon)
    wind = resolve_wind(config, args.wind, args.day, scale=not args.no_scale)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = sim.run(config, wind)
    m = metrics.run_metrics(trace)
    diag = metrics.contraction_diagnostics(trace)
    sim.write_trace_csv(trace, out / "trace.csv")
    sim.write_trace_json(trace, out / "trace.json")
    sim.write_timing_csv(trace, out / "timing.csv")
    metrics.write_metrics_json(m, out / "metrics.json", diag)
    metrics.write_timing_json(m, out / "timing.json")
    print(f"{trace.label}: utilization {m.energy_utilization:.4f}, storage "
          f"{m.storage_energy:.3f} Wh, HTO peak {m.hto_peak:.6f}, "
          f"violations {m.hto_violations}, relaxed steps {m.relaxed_step_count}")
    return EXIT_UNSAFE if m.hto_violations else EXIT_OK


def cmd_repdays(args: argparse.Namespace) -> int:
    profile = load_wind_csv(args.wind)
    rep = representative_days(profile, k=args.k, seed=args.seed,
                              downsample_factor=args.downsample)
    manifest = export_representative_days(rep, args.out)
    for d, w, idx in zip(rep.days, rep.weights, rep.day_indices):
        print(f"{d.label}: source day {idx}, weight {w}")
    print(f"manifest: {manifest}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace, kind: str) -> int:
    values = _parse_values(args.values)
    config = load_config(args.config)
    if args.horizon is not None:
        config = replace(config, horizon_steps=args.horizon)
    wind = resolve_wind(config, args.wind, args.day)
    if kind == "gain":
        rows = metrics.sweep_gain(config, wind, values, workers=args.workers)
    else:
        try:
            rows = metrics.sweep_alpha(config, wind, values, workers=args.workers)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_sweep_csv(rows, out / f"sweep_{kind}.csv", kind)
    metrics.write_sweep_timing_csv(rows, out / f"sweep_{kind}_timing.csv", kind)
    for r in rows:
        m = r.metrics
        print(f"{kind}={r.value:g}: utilization {m.energy_utilization:.4f}, storage "
              f"{m.storage_energy:.3f} Wh, solve avg {m.solve_time_avg * 1e3:.3f} ms, "
              f"violations {m.hto_violations}")
    return EXIT_UNSAFE if any(r.metrics.hto_violations for r in rows) else EXIT_OK


def cmd_sweep_gain(args: argparse.Namespace) -> int:
    return _cmd_sweep(args, "gain")


def cmd_sweep_alpha(args: argparse.Namespace) -> int:
    return _cmd_sweep(args, "alpha")


def format_report(trace: sim.Trace) -> str:
    m = metrics.run_metrics(trace)
    lines = [f"trace: {trace.label or '(unlabelled)'}  units: {trace.n_ele}  steps: {len(trace)}",
             "",
             f"{'solve time':<12}{'average (ms)':>14}{'p95 (ms)':>12}{'maximum (ms)':>14}"]
    if math.isnan(m.solve_time_avg):
        lines.append(f"{'controller':<12}{'n/a':>14}{'n/a':>12}{'n/a':>14}")
    else:
        lines.append(f"{'controller':<12}{m.solve_time_avg * 1e3:>14.3f}"
                     f"{m.solve_time_p95 * 1e3:>12.3f}{m.solve_time_max * 1e3:>14.3f}")
    lines += [
        "",
        f"HTO peak:           {m.hto_peak:.6f}",
        f"HTO violations:     {m.hto_violations}",
        f"relaxed steps:      {m.relaxed_step_count}",
        f"energy utilization: {m.energy_utilization:.4f}",
        f"storage energy:     {m.storage_energy:.3f} Wh",
        f"safety: {'VIOLATED' if m.hto_violations else 'ok'}",
    ]
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace) -> int:
    trace = sim.read_trace_json(args.trace, args.timing)
    print(format_report(trace))
    return EXIT_UNSAFE if metrics.hto_violations(trace) else EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    if args.out and not args.config:
        raise UsageError("--out needs --config to know which file to update")
    if args.config:
        config = load_config(args.config)
        params, t_a = config.electrolyzers[0], config.ambient_temp
    else:
        params, t_a = ElectrolyzerParams(), 25.0
    res = calibrate_crossover(params, t_a, load_fraction=args.load_fraction,
                              target_fraction=args.target_fraction, hours=args.hours)
    print(f"cross_c1 = {res.cross_c1:.6e} mol/(s A)")
    print(f"HTO at {args.load_fraction:g} of rated current: {res.hto_low_load:.6f}")
    print(f"HTO at rated current: {res.hto_rated:.6f}")
    if args.out:
        raw = json.loads(Path(args.config).read_text())
        raw.setdefault("electrolyzer", {})["cross_c1"] = res.cross_c1
        Path(args.out).write_text(json.dumps(raw, indent=2) + "\n")
        print(f"wrote {args.out}")
    return EXIT_OK


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="electro-coord",
                                 description="Safe coordinated dispatch of an electrolyzer cluster.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one closed-loop scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--wind", help="wind CSV or representative-day manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--day", type=int, help="calendar day (CSV) or representative day (manifest)")
    s.add_argument("--horizon", type=int, help="override horizon_steps")
    s.add_argument("--no-scale", action="store_true", help="use wind samples as given, in W")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("repdays", help="extract representative days by K-means")
    r.add_argument("--wind", required=True)
    r.add_argument("--k", type=int, default=8)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--downsample", type=int, default=None,
                   help="samples averaged per feature (default: one minute)")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_repdays)

    for name, func, what in (("sweep-gain", cmd_sweep_gain, "FO gain factors"),
                             ("sweep-alpha", cmd_sweep_alpha, "barrier decay rates")):
        w = sub.add_parser(name, help=f"one run per value of the {what}")
        w.add_argument("--config", required=True)
        w.add_argument("--wind")
        w.add_argument("--day", type=int)
        w.add_argument("--values", required=True, help="comma-separated list")
        w.add_argument("--out", required=True)
        w.add_argument("--horizon", type=int)
        w.add_argument("--workers", type=int, default=None,
                       help=f"parallel runs (default: cores, capped by {metrics.THREADS_ENV})")
        w.set_defaults(func=func)

    p = sub.add_parser("report", help="print solve-time and safety summary of a trace")
    p.add_argument("--trace", required=True, help="trace.json written by simulate")
    p.add_argument("--timing", help="timing CSV (default: timing.csv next to the trace)")
    p.set_defaults(func=cmd_report)

    c = sub.add_parser("calibrate", help="fit the crossover slope to the low-load HTO target")
    c.add_argument("--config")
    c.add_argument("--load-fraction", type=float, default=0.1)
    c.add_argument("--target-fraction", type=float, default=0.95)
    c.add_argument("--hours", type=float, default=12.0)
    c.add_argument("--out", help="write the config with the fitted cross_c1")
    c.set_defaults(func=cmd_calibrate)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, WindDataError, UsageError, sim.TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EmptyAdmissibleSetError, sim.UnsafeInitialStateError) as exc:
        print(f"safety failure: {exc}", file=sys.stderr)
        return EXIT_UNSAFE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

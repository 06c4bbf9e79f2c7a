"""Wind profiles: CSV ingestion, scaling, resampling and representative days."""
from __future__ import annotations

import gzip
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.signal import lfilter

log = logging.getLogger(__name__)

DAY_SECONDS = 86400


class WindDataError(ValueError):
    pass


@dataclass(frozen=True)
class WindProfile:
    dt: float
    samples: np.ndarray
    label: str = ""
    clamped_negative: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise WindDataError("dt must be positive")
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1:
            raise WindDataError("samples must be one-dimensional")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt

    @property
    def samples_per_day(self) -> int:
        spd = DAY_SECONDS / self.dt
        if abs(spd - round(spd)) > 1e-9:
            raise WindDataError(f"dt={self.dt} does not divide a day")
        return int(round(spd))


@dataclass(frozen=True)
class RepresentativeDaySet:
    k: int
    days: tuple[WindProfile, ...]
    weights: tuple[int, ...]
    assignments: tuple[int, ...]
    day_indices: tuple[int, ...]
    seed: int
    downsample_factor: int
    source_peak_w: float
    inertia: float = math.nan
    inertia_history: tuple[float, ...] = field(default=(), repr=False)


# ------------------------------------------------------------------ I/O

def load_wind_csv(path: str | Path, dt: float | None = None) -> WindProfile:
    """Read ``timestamp,power_w`` (or a lone ``power_w`` column).

    Timestamps may be ISO datetimes or seconds. Negative readings are
    clamped to zero and counted.
    """
    path = Path(path)
    if not path.is_file():
        raise WindDataError(f"wind file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError as exc:
        raise WindDataError(f"{path}: empty file") from exc
    if "power_w" not in frame.columns:
        raise WindDataError(f"{path}: missing power_w column")
    if frame.empty:
        raise WindDataError(f"{path}: empty file")
    power = frame["power_w"].to_numpy(dtype=float)
    if not np.isfinite(power).all():
        raise WindDataError(f"{path}: non-finite power readings")

    if "timestamp" in frame.columns:
        ts = frame["timestamp"]
        if pd.api.types.is_numeric_dtype(ts):
            seconds = ts.to_numpy(dtype=float)
        else:
            stamps = pd.to_datetime(ts)
            seconds = (stamps - stamps.iloc[0]).dt.total_seconds().to_numpy()
        if len(seconds) > 1:
            steps = np.diff(seconds)
            inferred = float(steps[0])
            if inferred <= 0 or np.max(np.abs(steps - inferred)) > 1e-6 * inferred:
                raise WindDataError(f"{path}: non-uniform timestamps")
            if dt is not None and abs(dt - inferred) > 1e-9 * inferred:
                raise WindDataError(f"{path}: timestamps give dt={inferred}, expected {dt}")
            dt = inferred
    if dt is None:
        dt = 1.0

    negative = int(np.count_nonzero(power < 0))
    if negative:
        log.warning("%s: %d negative readings clamped to 0", path, negative)
        power = np.maximum(power, 0.0)
    return WindProfile(dt, power, path.stem, negative)


def write_wind_csv(profile: WindProfile, path: str | Path) -> None:
    n = len(profile)
    frame = pd.DataFrame({"timestamp": np.arange(n) * profile.dt, "power_w": profile.samples})
    opts = dict(index=False, float_format="%.10g", lineterminator="\n")
    if not str(path).endswith(".gz"):
        frame.to_csv(path, **opts)
        return
    # empty name and zero mtime in the gzip header keep the bytes reproducible
    with open(path, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw,
                                                mtime=0) as gz:
        with io.TextIOWrapper(gz, encoding="utf-8", newline="") as text:
            frame.to_csv(text, **opts)


# ------------------------------------------------------------- transforms

def scale_profile(profile: WindProfile, target_peak: float,
                  reference_peak: float | None = None) -> WindProfile:
    """Rescale so that ``reference_peak`` (default: the profile maximum)
    maps to ``target_peak``."""
    ref = float(np.max(profile.samples)) if reference_peak is None else reference_peak
    if not ref > 0:
        raise WindDataError("degenerate profile: peak power is zero")
    return replace(profile, samples=profile.samples * (target_peak / ref))


def resample(profile: WindProfile, dt: float) -> WindProfile:
    """Linear interpolation onto a ``dt`` grid covering the same duration."""
    if abs(dt - profile.dt) <= 1e-12 * profile.dt:
        return profile
    n = int(round(profile.duration / dt))
    t_old = np.arange(len(profile)) * profile.dt
    t_new = np.arange(n) * dt
    return replace(profile, dt=dt, samples=np.interp(t_new, t_old, profile.samples))


def slice_day(profile: WindProfile, day: int) -> WindProfile:
    spd = profile.samples_per_day
    n_days = len(profile) // spd
    if not 0 <= day < n_days:
        raise WindDataError(f"day {day} outside 0..{n_days - 1}")
    return replace(profile, samples=profile.samples[day * spd:(day + 1) * spd].copy(),
                   label=f"{profile.label}-day{day:03d}")


def synthetic_wind(days: int = 365, dt: float = 60.0, seed: int = 2019,
                   rated_w: float = 50e6) -> WindProfile:
    """Synthetic wind-farm output: seasonal mean, multi-day weather regime,
    diurnal cycle and minute-scale turbulence mapped through a turbine power
    curve (cut-in 3 m/s, rated 12 m/s, cut-out 25 m/s)."""
    rng = np.random.default_rng(seed)
    n = int(round(days * DAY_SECONDS / dt))
    t = np.arange(n) * dt
    doy = t / DAY_SECONDS
    hour = (t % DAY_SECONDS) / 3600.0

    seasonal = 7.0 + 1.6 * np.cos(2 * np.pi * (doy - 40.0) / 365.0)
    # hourly weather regime, AR(1) with ~40 h memory, then interpolated
    n_hours = int(math.ceil(days * 24)) + 1
    phi = math.exp(-1.0 / 40.0)
    shocks = rng.normal(size=n_hours) * math.sqrt(1 - phi * phi)
    shocks[0] = rng.normal()
    z = lfilter([1.0], [1.0, -phi], shocks)
    regime = np.interp(t / 3600.0, np.arange(n_hours), z)
    diurnal = 0.9 * np.sin(2 * np.pi * (hour - 10.0) / 24.0)
    # minute-scale turbulence, OU with ~8 min correlation
    a = math.exp(-dt / 480.0)
    eps = rng.normal(size=n) * math.sqrt(1 - a * a)
    eps[0] = rng.normal()
    turb = lfilter([1.0], [1.0, -a], eps)

    speed = seasonal * np.exp(0.42 * regime - 0.09) + diurnal
    speed = np.maximum(speed * (1.0 + 0.12 * turb), 0.0)

    cut_in, rated, cut_out = 3.0, 12.0, 25.0
    frac = np.clip((speed**3 - cut_in**3) / (rated**3 - cut_in**3), 0.0, 1.0)
    frac[(speed < cut_in) | (speed >= cut_out)] = 0.0
    return WindProfile(dt, rated_w * frac, f"synthetic-{seed}")


# ------------------------------------------------------------- clustering

def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[int(rng.integers(n))]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def kmeans(x: np.ndarray, init: np.ndarray, max_iter: int = 300, rtol: float = 1e-8
           ) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd iterations from ``init``. Returns centers, labels and the
    within-cluster sum of squares after every assignment step."""
    centers = np.array(init, dtype=float)
    k = len(centers)
    labels = None
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _sq_dists(x, centers)
        new_labels = np.argmin(d2, axis=1)
        for j in range(k):
            if not np.any(new_labels == j):
                # reseed an empty cluster with the worst-fitted point
                far = int(np.argmax(d2[np.arange(len(x)), new_labels]))
                new_labels[far] = j
        inertia = float(d2[np.arange(len(x)), new_labels].sum())
        converged = labels is not None and np.array_equal(labels, new_labels)
        if history and history[-1] - inertia <= rtol * max(history[-1], 1e-300):
            converged = True
        history.append(inertia)
        labels = new_labels
        centers = np.array([x[labels == j].mean(axis=0) for j in range(k)])
        if converged:
            break
    final = float(_sq_dists(x, centers)[np.arange(len(x)), labels].sum())
    if final < history[-1]:
        history.append(final)
    return centers, labels, history


def representative_days(profile: WindProfile, k: int = 8, seed: int = 0,
                        downsample_factor: int | None = None) -> RepresentativeDaySet:
    """Cluster daily profiles with K-means (k-means++ seeding) and pick, per
    cluster, the member day closest to the centroid.

    Features are unnormalized daily vectors averaged over
    ``downsample_factor`` samples (default: one-minute resolution).
    Representatives are ordered by mean power, highest first.
    """
    spd = profile.samples_per_day
    if len(profile) % spd:
        raise WindDataError(
            f"profile length {len(profile)} is not a whole number of days ({spd} samples/day)")
    n_days = len(profile) // spd
    if not 1 <= k <= n_days:
        raise WindDataError(f"k={k} must be between 1 and the day count {n_days}")
    if downsample_factor is None:
        downsample_factor = max(1, int(round(60.0 / profile.dt)))
    if spd % downsample_factor:
        raise WindDataError(f"downsample factor {downsample_factor} does not divide {spd}")

    daily = profile.samples.reshape(n_days, spd)
    feats = daily.reshape(n_days, spd // downsample_factor, downsample_factor).mean(axis=2)
    rng = np.random.default_rng(seed)
    init = kmeans_plus_plus(feats, k, rng)
    centers, labels, history = kmeans(feats, init)

    medoids = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        d2 = np.sum((feats[members] - centers[j]) ** 2, axis=1)
        medoids.append(int(members[int(np.argmin(d2))]))
    order = sorted(range(k), key=lambda j: (-daily[medoids[j]].mean(), medoids[j]))
    remap = {old: new for new, old in enumerate(order)}

    days = tuple(
        WindProfile(profile.dt, daily[medoids[j]].copy(), f"repday-{chr(ord('a') + i)}"
                    if k <= 26 else f"repday-{i}")
        for i, j in enumerate(order)
    )
    return RepresentativeDaySet(
        k=k,
        days=days,
        weights=tuple(int(np.count_nonzero(labels == j)) for j in order),
        assignments=tuple(remap[int(j)] for j in labels),
        day_indices=tuple(medoids[j] for j in order),
        seed=seed,
        downsample_factor=downsample_factor,
        source_peak_w=float(profile.samples.max()),
        inertia=history[-1],
        inertia_history=tuple(history),
    )


def export_representative_days(rep: RepresentativeDaySet, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, day in enumerate(rep.days):
        name = f"day_{i:02d}.csv"
        write_wind_csv(day, out / name)
        files.append(name)
    manifest = {
        "k": rep.k,
        "seed": rep.seed,
        "dt": rep.days[0].dt,
        "downsample_factor": rep.downsample_factor,
        "source_peak_w": rep.source_peak_w,
        "files": files,
        "labels": [d.label for d in rep.days],
        "weights": list(rep.weights),
        "day_indices": list(rep.day_indices),
        "assignments": list(rep.assignments),
        "inertia": rep.inertia,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_representative_days(manifest_path: str | Path) -> RepresentativeDaySet:
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.is_file():
        raise WindDataError(f"manifest not found: {path}")
    meta = json.loads(path.read_text())
    days = []
    for name, label in zip(meta["files"], meta["labels"]):
        prof = load_wind_csv(path.parent / name, dt=meta["dt"])
        days.append(replace(prof, label=label))
    return RepresentativeDaySet(
        k=meta["k"], days=tuple(days), weights=tuple(meta["weights"]),
        assignments=tuple(meta["assignments"]), day_indices=tuple(meta["day_indices"]),
        seed=meta["seed"], downsample_factor=meta["downsample_factor"],
        source_peak_w=meta["source_peak_w"], inertia=meta.get("inertia", math.nan),
    )

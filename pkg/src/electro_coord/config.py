"""Parameter containers, validation and JSON config loading.

All temperatures are stored in degrees Celsius. Currents are stack currents
in A, powers in W.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

# standard reversible cell voltage at 25 degC
U_REV_CELL = 1.229
FARADAY = 96485.0
GAS_CONST = 8.314
T_NOMINAL = 60.0
# default ramp limit as a fraction of rated current per second
RAMP_FRACTION = 0.2


class ConfigError(ValueError):
    """Raised when a config file is missing, malformed or inconsistent."""


@dataclass(frozen=True)
class ElectrolyzerParams:
    n_cell: int = 45
    u_limit: float = 2.1
    rho1: float = 3.11
    rho2: float = -0.025
    u_rev: float = U_REV_CELL * 45
    r_th: float = 0.054
    c_th: float = 15000.0
    eta_f: float = 1.0
    z_h: float = 2.0
    faraday: float = FARADAY
    gas_const: float = GAS_CONST
    pressure: float = 1.0e5
    v_an: float = 0.005
    v_sep_g: float = 3.0e-5
    tau_sep_l: float = 120.0
    v_lye: float = 1.0e-4
    cross_c0: float = 4.7e-6
    cross_c1: float = 2.8477e-7
    delta_i_max: float = 4.869
    hto_max: float = 0.02
    absolute_temperature_in_hto: bool = False

    @property
    def u_max(self) -> float:
        """Stack voltage limit n_cell * u_limit."""
        return self.n_cell * self.u_limit

    @property
    def hto_temp_offset(self) -> float:
        return 273.15 if self.absolute_temperature_in_hto else 0.0


@dataclass(frozen=True)
class ControllerParams:
    epsilon: float = 1e-5
    alpha: float = 0.8
    dt: float = 1.0


@dataclass(frozen=True)
class InitialState:
    """Hydrogen inventory seeds; temperature comes from ``initial_temps``."""

    n_an: float = 0.0
    n_sep_l: float = 0.0
    n_sep_g: float = 0.0


@dataclass(frozen=True)
class WindSource:
    path: str | None = None
    # None -> cluster rating, sum of max_power at t_nominal
    target_peak_w: float | None = None
    t_nominal: float = T_NOMINAL
    # scale relative to this reference peak instead of the profile maximum
    reference_peak_w: float | None = None


@dataclass(frozen=True)
class SimConfig:
    n_ele: int
    ambient_temp: float
    initial_temps: tuple[float, ...]
    initial_states: tuple[InitialState, ...]
    horizon_steps: int
    electrolyzers: tuple[ElectrolyzerParams, ...]
    controller: ControllerParams = field(default_factory=ControllerParams)
    wind_source: WindSource = field(default_factory=WindSource)
    rng_seed: int = 0
    initial_currents: tuple[float, ...] | None = None

    def with_controller(self, **changes: float) -> SimConfig:
        return replace(self, controller=replace(self.controller, **changes))


@dataclass(frozen=True)
class Violation:
    field: str
    reason: str

    def __str__(self) -> str:
        return f"{self.field}: {self.reason}"


def rated_current(p: ElectrolyzerParams, t_nominal: float = T_NOMINAL) -> float:
    """Maximum current at the nominal temperature, used as the unit rating."""
    return (p.u_max - p.u_rev) / (p.rho1 + p.rho2 * t_nominal)


def validate_electrolyzer(p: ElectrolyzerParams, ambient_temp: float,
                          prefix: str = "electrolyzer") -> list[Violation]:
    out: list[Violation] = []

    def bad(name: str, reason: str) -> None:
        out.append(Violation(f"{prefix}.{name}", reason))

    if p.rho2 > 0:
        bad("rho2", "rho2 must be <= 0")
    if p.rho1 + p.rho2 * ambient_temp <= 0:
        bad("rho1", "rho1 + rho2*ambient_temp must be > 0")
    for name in ("r_th", "c_th", "v_an", "v_sep_g", "tau_sep_l", "v_lye",
                 "pressure", "faraday", "gas_const", "z_h"):
        if not getattr(p, name) > 0:
            bad(name, f"{name} must be positive")
    if not 0 < p.eta_f <= 1:
        bad("eta_f", "eta_f out of (0,1]")
    if not 0 < p.hto_max < 1:
        bad("hto_max", "hto_max out of (0,1)")
    if p.n_cell < 1:
        bad("n_cell", "n_cell must be >= 1")
    if not p.u_limit > 0:
        bad("u_limit", "u_limit must be positive")
    if p.u_rev < 0:
        bad("u_rev", "u_rev must be >= 0")
    elif p.u_rev >= p.u_max:
        bad("u_rev", "u_rev must be below n_cell*u_limit")
    if not p.delta_i_max > 0:
        bad("delta_i_max", "delta_i_max must be positive")
    if p.cross_c0 < 0 or p.cross_c1 < 0:
        bad("cross_c0", "crossover coefficients must be >= 0")
    return out


def validate_controller(c: ControllerParams) -> list[Violation]:
    out = []
    if not 0 < c.alpha <= 1:
        out.append(Violation("controller.alpha", "alpha out of (0,1]"))
    if not c.epsilon > 0:
        out.append(Violation("controller.epsilon", "epsilon must be positive"))
    if not c.dt > 0:
        out.append(Violation("controller.dt", "dt must be positive"))
    return out


def validate(config: SimConfig) -> list[Violation]:
    """Check every documented invariant; an empty list means valid."""
    out: list[Violation] = []
    if config.n_ele < 1:
        out.append(Violation("n_ele", "n_ele must be >= 1"))
    if len(config.initial_temps) != config.n_ele:
        out.append(Violation("initial_temps", "length must equal n_ele"))
    if len(config.initial_states) != config.n_ele:
        out.append(Violation("initial_states", "length must equal n_ele"))
    if len(config.electrolyzers) != config.n_ele:
        out.append(Violation("electrolyzers", "length must equal n_ele"))
    if config.initial_currents is not None:
        if len(config.initial_currents) != config.n_ele:
            out.append(Violation("initial_currents", "length must equal n_ele"))
        elif any(i < 0 for i in config.initial_currents):
            out.append(Violation("initial_currents", "currents must be >= 0"))
    if config.horizon_steps < 1:
        out.append(Violation("horizon_steps", "horizon_steps must be >= 1"))
    for k, s in enumerate(config.initial_states):
        if min(s.n_an, s.n_sep_l, s.n_sep_g) < 0:
            out.append(Violation(f"initial_states[{k}]", "moles must be >= 0"))
    for k, p in enumerate(config.electrolyzers):
        out.extend(validate_electrolyzer(p, config.ambient_temp, f"electrolyzers[{k}]"))
    out.extend(validate_controller(config.controller))
    if config.wind_source.target_peak_w is not None and config.wind_source.target_peak_w <= 0:
        out.append(Violation("wind_source.target_peak_w", "must be positive"))
    return out


# ---------------------------------------------------------------- loading

_TOP_KEYS = {"n_ele", "ambient_temp", "initial_temps", "initial_states",
             "initial_currents", "horizon_steps", "electrolyzer", "electrolyzers",
             "controller", "wind_source", "rng_seed",
             "absolute_temperature_in_hto", "description"}
_REQUIRED = ("n_ele", "initial_temps")


def _check_type(key: str, value: Any, kind: type | tuple[type, ...]) -> None:
    if isinstance(value, bool) and kind is not bool and bool not in (
            kind if isinstance(kind, tuple) else (kind,)):
        raise ConfigError(f"{key}: expected {_kind_name(kind)}, got bool")
    if not isinstance(value, kind):
        raise ConfigError(f"{key}: expected {_kind_name(kind)}, got {type(value).__name__}")


def _kind_name(kind: type | tuple[type, ...]) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _build(cls: type, raw: dict[str, Any], where: str, base: Any = None) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{where}.{key}: unknown key")
        default = getattr(base, key) if base is not None else known[key].default
        if isinstance(default, bool):
            _check_type(f"{where}.{key}", value, bool)
        elif isinstance(default, int):
            _check_type(f"{where}.{key}", value, int)
        elif isinstance(default, float):
            _check_type(f"{where}.{key}", value, (int, float))
            value = float(value)
        elif value is not None and key.endswith("_w"):
            _check_type(f"{where}.{key}", value, (int, float))
            value = float(value)
        kwargs[key] = value
    if base is not None:
        return replace(base, **kwargs)
    return cls(**kwargs)


def electrolyzer_from_dict(raw: dict[str, Any], where: str = "electrolyzer",
                           base: ElectrolyzerParams | None = None) -> ElectrolyzerParams:
    """Build params, filling u_rev and delta_i_max from their derived defaults."""
    p = _build(ElectrolyzerParams, raw, where, base)
    if "u_rev" not in raw and (base is None or "n_cell" in raw):
        p = replace(p, u_rev=U_REV_CELL * p.n_cell)
    rating_keys = {"n_cell", "u_limit", "rho1", "rho2", "u_rev"}
    if "delta_i_max" not in raw and (base is None or rating_keys & raw.keys()):
        denom = p.rho1 + p.rho2 * T_NOMINAL
        if denom > 0 and p.u_max > p.u_rev:
            p = replace(p, delta_i_max=RAMP_FRACTION * rated_current(p))
    return p


def config_from_dict(raw: dict[str, Any]) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(f"{key}: unknown key")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"{key}: missing required key")

    n_ele = raw["n_ele"]
    _check_type("n_ele", n_ele, int)
    ambient = raw.get("ambient_temp", 25.0)
    _check_type("ambient_temp", ambient, (int, float))

    temps = raw["initial_temps"]
    _check_type("initial_temps", temps, list)
    for k, t in enumerate(temps):
        _check_type(f"initial_temps[{k}]", t, (int, float))

    abs_flag = raw.get("absolute_temperature_in_hto", False)
    _check_type("absolute_temperature_in_hto", abs_flag, bool)

    shared_raw = dict(raw.get("electrolyzer", {}))
    if "absolute_temperature_in_hto" in shared_raw:
        raise ConfigError("electrolyzer.absolute_temperature_in_hto: set it at top level")
    shared_raw["absolute_temperature_in_hto"] = abs_flag
    shared = electrolyzer_from_dict(shared_raw, "electrolyzer")

    per_unit = raw.get("electrolyzers")
    if per_unit is None:
        units = tuple(shared for _ in range(n_ele))
    else:
        _check_type("electrolyzers", per_unit, list)
        units = tuple(
            electrolyzer_from_dict(item, f"electrolyzers[{k}]", base=shared) if item else shared
            for k, item in enumerate(per_unit)
        )

    states_raw = raw.get("initial_states")
    if states_raw is None:
        states = tuple(InitialState() for _ in range(n_ele))
    else:
        _check_type("initial_states", states_raw, list)
        states = tuple(_build(InitialState, s, f"initial_states[{k}]")
                       for k, s in enumerate(states_raw))

    currents = raw.get("initial_currents")
    if currents is not None:
        _check_type("initial_currents", currents, list)
        for k, c in enumerate(currents):
            _check_type(f"initial_currents[{k}]", c, (int, float))
        currents = tuple(float(c) for c in currents)

    horizon = raw.get("horizon_steps", 86400)
    _check_type("horizon_steps", horizon, int)
    seed = raw.get("rng_seed", 0)
    _check_type("rng_seed", seed, int)

    controller = _build(ControllerParams, raw.get("controller", {}), "controller")
    wind = _build(WindSource, raw.get("wind_source", {}), "wind_source")
    if wind.path is not None and not isinstance(wind.path, str):
        raise ConfigError("wind_source.path: expected str")

    return SimConfig(
        n_ele=n_ele,
        ambient_temp=float(ambient),
        initial_temps=tuple(float(t) for t in temps),
        initial_states=states,
        horizon_steps=horizon,
        electrolyzers=units,
        controller=controller,
        wind_source=wind,
        rng_seed=seed,
        initial_currents=currents,
    )


def load_config(path: str | Path, *, check: bool = True) -> SimConfig:
    """Load a JSON run config, filling defaults for omitted optional fields.

    Raises ConfigError for a missing file, malformed JSON, unknown or
    mistyped keys, and (when ``check``) for any invariant violation.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    config = config_from_dict(raw)
    ws = config.wind_source
    if ws.path is not None and not Path(ws.path).is_absolute():
        config = replace(config, wind_source=replace(ws, path=str(path.parent / ws.path)))
    if check:
        problems = validate(config)
        if problems:
            raise ConfigError("; ".join(str(v) for v in problems))
    return config


def cluster_rating(config: SimConfig) -> float:
    """Sum of unit maximum powers at the nominal temperature, in W."""
    t = config.wind_source.t_nominal
    total = 0.0
    for p in config.electrolyzers:
        denom = p.rho1 + p.rho2 * t
        if denom <= 0 or not math.isfinite(denom):
            raise ConfigError("rho1 + rho2*t_nominal must be > 0 to rate the cluster")
        total += p.u_max * (p.u_max - p.u_rev) / denom
    return total


def config_from_snapshot(raw: dict[str, Any]) -> SimConfig:
    """Inverse of ``dataclasses.asdict`` on a SimConfig (trace snapshots)."""
    currents = raw.get("initial_currents")
    return SimConfig(
        n_ele=int(raw["n_ele"]),
        ambient_temp=float(raw["ambient_temp"]),
        initial_temps=tuple(float(t) for t in raw["initial_temps"]),
        initial_states=tuple(InitialState(**s) for s in raw["initial_states"]),
        horizon_steps=int(raw["horizon_steps"]),
        electrolyzers=tuple(ElectrolyzerParams(**p) for p in raw["electrolyzers"]),
        controller=ControllerParams(**raw["controller"]),
        wind_source=WindSource(**raw["wind_source"]),
        rng_seed=int(raw["rng_seed"]),
        initial_currents=None if currents is None else tuple(float(c) for c in currents),
    )

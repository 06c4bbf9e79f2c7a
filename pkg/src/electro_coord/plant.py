"""Electrolyzer power, lumped thermal and three-compartment HTO models.

The stepper is the explicit Euler form the CBF coefficients are derived
from; ``cbf.cbf_coefficients`` relies on it being transcribed literally.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .config import ElectrolyzerParams

log = logging.getLogger(__name__)


class ModelValidityError(ValueError):
    """The linear resistance term rho1 + rho2*T is not positive."""


@dataclass(frozen=True, slots=True)
class ElectrolyzerState:
    t_ele: float
    n_an: float = 0.0
    n_sep_l: float = 0.0
    n_sep_g: float = 0.0


def resistance(p: ElectrolyzerParams, t_ele: float) -> float:
    r = p.rho1 + p.rho2 * t_ele
    if r <= 0:
        raise ModelValidityError(f"rho1 + rho2*T = {r:g} <= 0 at T = {t_ele:g} degC")
    return r


def cell_voltage(p: ElectrolyzerParams, t_ele: float, i: float) -> float:
    """Stack voltage at current ``i`` (semi-empirical linear model)."""
    if i < 0:
        raise ValueError(f"negative current {i}")
    return p.u_rev + (p.rho1 + p.rho2 * t_ele) * i


def max_current(p: ElectrolyzerParams, t_ele: float) -> float:
    return (p.u_max - p.u_rev) / resistance(p, t_ele)


def max_power(p: ElectrolyzerParams, t_ele: float) -> float:
    return p.u_max * max_current(p, t_ele)


def electrolyzer_power(p: ElectrolyzerParams, t_ele: float, i: float) -> float:
    return cell_voltage(p, t_ele, i) * i


def crossover_rate(p: ElectrolyzerParams, i: float) -> float:
    """Hydrogen crossover into the anode loop, affine in current."""
    if i < 0:
        raise ValueError(f"negative current {i}")
    return max(0.0, p.cross_c0 + p.cross_c1 * i)


def oxygen_rate(p: ElectrolyzerParams, i: float) -> float:
    return p.eta_f * p.n_cell * i / (2.0 * p.z_h * p.faraday)


def hto(p: ElectrolyzerParams, state: ElectrolyzerState) -> float:
    """Hydrogen-in-oxygen fraction of the separator gas phase."""
    t = state.t_ele + p.hto_temp_offset
    return t * state.n_sep_g * p.gas_const / (p.pressure * p.v_sep_g)


def euler_update(p: ElectrolyzerParams, state: ElectrolyzerState, i: float,
                 t_a: float, dt: float) -> tuple[ElectrolyzerState, bool]:
    """One explicit Euler step; returns the new state and whether a mole
    field had to be clamped at zero."""
    if i < 0:
        raise ValueError(f"negative current {i}")
    t = state.t_ele
    n_an, n_sl, n_sg = state.n_an, state.n_sep_l, state.n_sep_g

    t_next = t - dt / (p.r_th * p.c_th) * (t - t_a) + dt / p.c_th * (p.rho1 + p.rho2 * t) * i * i

    cross = max(0.0, p.cross_c0 + p.cross_c1 * i)
    an_out = n_an * p.v_lye / p.v_an / 2.0
    sl_out = n_sl / p.tau_sep_l
    th = t + p.hto_temp_offset
    sg_out = (p.eta_f * p.n_cell * n_sg * th * p.gas_const * i
              / (2.0 * p.z_h * p.faraday * p.pressure * p.v_sep_g))

    n_an_next = n_an + (cross - an_out) * dt
    n_sl_next = n_sl + (an_out - sl_out) * dt
    n_sg_next = n_sg + sl_out * dt - sg_out * dt

    clamped = False
    if n_an_next < 0.0:
        n_an_next, clamped = 0.0, True
    if n_sl_next < 0.0:
        n_sl_next, clamped = 0.0, True
    if n_sg_next < 0.0:
        n_sg_next, clamped = 0.0, True
    return ElectrolyzerState(t_next, n_an_next, n_sl_next, n_sg_next), clamped


def step(p: ElectrolyzerParams, state: ElectrolyzerState, i: float,
         t_a: float, dt: float) -> ElectrolyzerState:
    """Advance one sampling period with current ``i`` held constant."""
    new, clamped = euler_update(p, state, i, t_a, dt)
    if clamped:
        log.warning("negative mole amount clamped at zero (i=%g A, state=%s)", i, state)
    return new

"""Steady-state power map and the sampled feedback-optimization update."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

from .config import ControllerParams, ElectrolyzerParams


@dataclass(frozen=True)
class SteadyMapEval:
    h: float
    dh_du: float
    t_hat: float


def steady_temperature(p: ElectrolyzerParams, u: float, t_a: float) -> float:
    """Equilibrium temperature of the lumped thermal model at constant current."""
    u2 = u * u
    return (t_a + p.r_th * p.rho1 * u2) / (1.0 - p.r_th * p.rho2 * u2)


def steady_power(p: ElectrolyzerParams, u: float, t_a: float) -> float:
    u2 = u * u
    return p.u_rev * u + (p.rho1 + p.rho2 * t_a) * u2 / (1.0 - p.r_th * p.rho2 * u2)


def steady_power_gradient(p: ElectrolyzerParams, u: float, t_a: float) -> float:
    den = 1.0 - p.r_th * p.rho2 * u * u
    return p.u_rev + 2.0 * (p.rho1 + p.rho2 * t_a) * u / (den * den)


def steady_map(p: ElectrolyzerParams, u: float, t_a: float) -> SteadyMapEval:
    return SteadyMapEval(steady_power(p, u, t_a), steady_power_gradient(p, u, t_a),
                         steady_temperature(p, u, t_a))


def power_mismatch(us: Sequence[float], params: Sequence[ElectrolyzerParams],
                   t_a: float, p_wind: float) -> float:
    """Steady cluster power minus available wind power, in W."""
    return sum(steady_power(p, u, t_a) for p, u in zip(params, us)) - p_wind


def surrogate_objective(us: Sequence[float], params: Sequence[ElectrolyzerParams],
                        t_a: float, p_wind: float) -> float:
    e = power_mismatch(us, params, t_a, p_wind)
    return 0.5 * e * e


def fo_update(us: Sequence[float], params: Sequence[ElectrolyzerParams], t_a: float,
              p_wind: float, ctrl: ControllerParams) -> list[float]:
    """Gradient step on the surrogate mismatch objective.

    No clipping happens here; components may come out negative and are
    handled by the projection layer.
    """
    e = power_mismatch(us, params, t_a, p_wind)
    k = ctrl.epsilon * ctrl.dt * e
    return [u - k * steady_power_gradient(p, u, t_a) for p, u in zip(params, us)]

"""Discrete-time CBF algebra for the HTO limit.

Substituting the Euler plant into the one-step barrier condition

    HTO(t+1) <= (1 - alpha) HTO(t) + alpha HTO_max

and multiplying through by P V_sep,g / R gives a cubic inequality in the
applied current

    k1 u^3 - k2 u^2 + k3 u + (k41 - k42) >= 0.

This module builds those coefficients and decomposes the nonnegative region
of the cubic over a box into at most two closed intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .config import ElectrolyzerParams
from .plant import ElectrolyzerState, hto

# relative discriminant band in which the closed form is not trusted
_DISC_BAND = 1e-12
# leading coefficients below this fraction of the scale are treated as zero
_DEGENERATE = 1e-14
_NEWTON_STEPS = 3


@dataclass(frozen=True, slots=True)
class CbfCoefficients:
    k1: float
    k2: float
    k3: float
    k41: float
    k42: float

    @property
    def k4(self) -> float:
        return self.k41 - self.k42

    @property
    def scale(self) -> float:
        return max(abs(self.k1), abs(self.k2), abs(self.k3), abs(self.k4))


@dataclass(frozen=True, slots=True)
class AdmissibleSet:
    """Sorted disjoint closed intervals; empty tuple means no admissible input."""

    intervals: tuple[tuple[float, float], ...]

    @property
    def empty(self) -> bool:
        return not self.intervals

    @property
    def u_minus(self) -> float:
        if not self.intervals:
            raise ValueError("empty admissible set has no minimum")
        return self.intervals[0][0]

    @property
    def u_max(self) -> float:
        if not self.intervals:
            raise ValueError("empty admissible set has no maximum")
        return self.intervals[-1][1]

    def contains(self, u: float, slack: float = 0.0) -> bool:
        return any(lo - slack <= u <= hi + slack for lo, hi in self.intervals)

    def nearest(self, u: float) -> float:
        """Closest member to ``u``; ties go to the smaller current."""
        best = None
        best_d = math.inf
        for lo, hi in self.intervals:
            c = lo if u < lo else hi if u > hi else u
            d = abs(c - u)
            if d < best_d:
                best, best_d = c, d
        if best is None:
            raise ValueError("empty admissible set")
        return best


def safe_value(p: ElectrolyzerParams, state: ElectrolyzerState) -> float:
    """Barrier value HTO_max - HTO; nonnegative inside the safe set."""
    return p.hto_max - hto(p, state)


def cbf_coefficients(p: ElectrolyzerParams, state: ElectrolyzerState, t_a: float,
                     alpha: float, dt: float) -> CbfCoefficients:
    t = state.t_ele
    off = p.hto_temp_offset
    th = t + off
    n_g = state.n_sep_g
    # temperature after one step without heating, and the heating gain per A^2
    a = t - dt / (p.r_th * p.c_th) * (t - t_a) + off
    b = dt / p.c_th * (p.rho1 + p.rho2 * t)
    # separator gas inventory after inflow, and the oxygen flushing gain per A
    c = n_g + state.n_sep_l * dt / p.tau_sep_l
    d = (p.eta_f * p.n_cell * dt / (2.0 * p.z_h * p.faraday)
         * n_g * th * p.gas_const / (p.pressure * p.v_sep_g))
    k41 = (1.0 - alpha) * th * n_g + alpha * p.hto_max * p.pressure * p.v_sep_g / p.gas_const
    return CbfCoefficients(k1=b * d, k2=b * c, k3=a * d, k41=k41, k42=a * c)


def cubic_value(c: CbfCoefficients, u: float) -> float:
    return ((c.k1 * u - c.k2) * u + c.k3) * u + (c.k41 - c.k42)


# ------------------------------------------------------------ root finding

def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _poly(a3: float, a2: float, a1: float, a0: float, x: float) -> float:
    return ((a3 * x + a2) * x + a1) * x + a0


def _polish(a3: float, a2: float, a1: float, a0: float, x: float) -> float:
    fx = _poly(a3, a2, a1, a0, x)
    for _ in range(_NEWTON_STEPS):
        if fx == 0.0:
            break
        df = (3.0 * a3 * x + 2.0 * a2) * x + a1
        if df == 0.0:
            break
        xn = x - fx / df
        fn = _poly(a3, a2, a1, a0, xn)
        if abs(fn) >= abs(fx):
            break
        x, fx = xn, fn
    return x


def quadratic_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of a x^2 + b x + c, cancellation-free; sorted."""
    if a == 0.0:
        if b == 0.0:
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    s = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(s, b))
    if q == 0.0:
        return [0.0]
    r1, r2 = q / a, c / q
    return sorted((r1, r2))


def _bisect_root(a3, a2, a1, a0, lo, hi, flo) -> float:
    # safeguarded Newton inside a sign-change bracket
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = _poly(a3, a2, a1, a0, x)
        if fx == 0.0:
            return x
        if (fx > 0) == (flo > 0):
            lo, flo = x, fx
        else:
            hi = x
        df = (3.0 * a3 * x + 2.0 * a2) * x + a1
        xn = x - fx / df if df != 0.0 else lo - 1.0
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if xn == x or hi - lo <= 4e-16 * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def bracketed_cubic_roots(a3: float, a2: float, a1: float, a0: float) -> list[float]:
    """Real roots by splitting at critical points and bracketing each
    monotone piece. Slower than the closed form but robust at repeated roots."""
    bound = 1.0 + max(abs(a2), abs(a1), abs(a0)) / abs(a3)
    knots = [-bound] + [x for x in quadratic_roots(3 * a3, 2 * a2, a1) if -bound < x < bound] + [bound]
    roots: list[float] = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        flo, fhi = _poly(a3, a2, a1, a0, lo), _poly(a3, a2, a1, a0, hi)
        if flo == 0.0:
            roots.append(lo)
        elif flo * fhi < 0.0:
            roots.append(_bisect_root(a3, a2, a1, a0, lo, hi, flo))
    f_end = _poly(a3, a2, a1, a0, knots[-1])
    if f_end == 0.0:
        roots.append(knots[-1])
    # a double root sits on a critical point with f == 0 there; already included
    out: list[float] = []
    for r in roots:
        if not out or r != out[-1]:
            out.append(r)
    return out


def cubic_real_roots(a3: float, a2: float, a1: float, a0: float) -> list[float]:
    """Sorted real roots of a3 x^3 + a2 x^2 + a1 x + a0 with a3 != 0.

    Closed form (Cardano / trigonometric) plus Newton polish; falls back to
    bracketing when the discriminant is within a relative band of zero.
    """
    b, c, d = a2 / a3, a1 / a3, a0 / a3
    shift = b / 3.0
    p = c - b * shift
    q = (2.0 * b * b * b) / 27.0 - b * c / 3.0 + d
    h = 0.25 * q * q
    g = p * p * p / 27.0
    disc = h + g
    if abs(disc) <= _DISC_BAND * max(abs(h), abs(g)):
        return bracketed_cubic_roots(a3, a2, a1, a0)
    if disc > 0.0:
        s = math.sqrt(disc)
        t = _cbrt(-0.5 * q + s) + _cbrt(-0.5 * q - s)
        roots = [t - shift]
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m) if p != 0.0 else 0.0
        theta = math.acos(min(1.0, max(-1.0, arg))) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]
    roots = sorted(_polish(a3, a2, a1, a0, r) for r in roots)
    return roots


def poly_roots(a3: float, a2: float, a1: float, a0: float, scale: float) -> list[float]:
    """Dispatch on the effective degree; negligible leading terms are dropped."""
    thresh = _DEGENERATE * scale
    if abs(a3) >= thresh:
        return cubic_real_roots(a3, a2, a1, a0)
    if abs(a2) >= thresh:
        return quadratic_roots(a2, a1, a0)
    if abs(a1) >= thresh:
        return [-a0 / a1]
    return []


def nonneg_region(c: CbfCoefficients, box: tuple[float, float],
                  tol: float = 1e-9) -> AdmissibleSet:
    """Subset of ``box`` where the cubic is >= -tol*scale, as <= 2 intervals."""
    lo, hi = box
    if hi < lo:
        return AdmissibleSet(())
    scale = c.scale
    if scale == 0.0:
        return AdmissibleSet(((lo, hi),))
    slack = tol * scale
    a3, a2, a1, a0 = c.k1, -c.k2, c.k3, c.k41 - c.k42

    def ok(x: float) -> bool:
        return _poly(a3, a2, a1, a0, x) >= -slack

    if hi == lo:
        return AdmissibleSet(((lo, hi),) if ok(lo) else ())

    knots = [lo]
    for r in poly_roots(a3, a2, a1, a0, scale):
        if lo < r < hi and r > knots[-1]:
            knots.append(r)
    knots.append(hi)

    pieces: list[list[float]] = []
    for left, right in zip(knots[:-1], knots[1:]):
        if ok(0.5 * (left + right)):
            if pieces and pieces[-1][1] == left:
                pieces[-1][1] = right
            else:
                pieces.append([left, right])
        else:
            # isolated touching points (double roots, box ends inside the slack)
            for x in (left, right):
                if ok(x) and not (pieces and pieces[-1][1] >= x):
                    pieces.append([x, x])
    merged: list[list[float]] = []
    for piece in pieces:
        if merged and piece[0] <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], piece[1])
        else:
            merged.append(piece)
    if len(merged) > 2:
        # only reachable through rounding; a cubic has at most two such pieces
        proper = [m for m in merged if m[1] > m[0]]
        merged = proper[:2] if proper else merged[:2]
    return AdmissibleSet(tuple((a, b) for a, b in merged))

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from electro_coord.cbf import (
    AdmissibleSet,
    CbfCoefficients,
    bracketed_cubic_roots,
    cbf_coefficients,
    cubic_real_roots,
    cubic_value,
    nonneg_region,
    quadratic_roots,
    safe_value,
)
from electro_coord.config import ElectrolyzerParams
from electro_coord.plant import ElectrolyzerState, euler_update, hto

P = ElectrolyzerParams()
PV_R = P.pressure * P.v_sep_g / P.gas_const


def gas_for(hto_value, t, p=P):
    return hto_value * p.pressure * p.v_sep_g / (p.gas_const * (t + p.hto_temp_offset))


def test_safe_value_examples():
    assert safe_value(P, ElectrolyzerState(30.0)) == 0.02
    assert safe_value(P, ElectrolyzerState(30.0, 0, 0, gas_for(0.02, 30.0))) == pytest.approx(0.0, abs=1e-15)
    assert safe_value(P, ElectrolyzerState(30.0, 0, 0, gas_for(0.03, 30.0))) == pytest.approx(-0.01)


def test_alpha_one_and_empty_gas_cases():
    s = ElectrolyzerState(40.0, 1e-4, 2e-4, gas_for(0.015, 40.0))
    c = cbf_coefficients(P, s, 25.0, 1.0, 1.0)
    assert c.k41 == P.hto_max * PV_R
    c0 = cbf_coefficients(P, ElectrolyzerState(40.0, 1e-4, 2e-4, 0.0), 25.0, 0.8, 1.0)
    assert c0.k1 == 0.0 and c0.k3 == 0.0
    assert cubic_value(c, 0.0) == c.k4


def test_pinned_coefficients_match_transcription():
    s = (52.5, 3.3e-4, 4.1e-4, gas_for(0.0123, 52.5))
    got = cbf_coefficients(P, ElectrolyzerState(*s), 25.0, 0.6, 1.0)
    want = oracles.cbf(oracles.table2(), s[0], s[2], s[3], 25.0, 0.6, 1.0)
    for g, w in zip((got.k1, got.k2, got.k3, got.k41, got.k42), want):
        assert g == pytest.approx(w, rel=1e-12)


@pytest.mark.parametrize("flag", [False, True])
def test_pinned_coefficients_absolute_temperature(flag):
    q = ElectrolyzerParams(absolute_temperature_in_hto=flag)
    s = (33.0, 1e-4, 1e-4, gas_for(0.01, 33.0, q))
    got = cbf_coefficients(q, ElectrolyzerState(*s), 25.0, 0.8, 1.0)
    want = oracles.cbf(oracles.table2(t_off=q.hto_temp_offset), s[0], s[2], s[3], 25.0, 0.8, 1.0)
    for g, w in zip((got.k1, got.k2, got.k3, got.k41, got.k42), want):
        assert g == pytest.approx(w, rel=1e-12)


states = st.builds(
    lambda t, an, sl, frac: ElectrolyzerState(t, an, sl, gas_for(frac * 0.02, t)),
    st.floats(20, 75), st.floats(0, 5e-3), st.floats(0, 5e-3), st.floats(0, 1.0))


@given(states, st.floats(0, 30), st.floats(1e-3, 1.0), st.floats(0.1, 2.0), st.booleans())
def test_cubic_equals_scaled_one_step_margin(s, u, alpha, dt, flag):
    p = ElectrolyzerParams(absolute_temperature_in_hto=flag)
    nxt, clamped = euler_update(p, s, u, 25.0, dt)
    assume(not clamped)
    c = cbf_coefficients(p, s, 25.0, alpha, dt)
    lhs = hto(p, nxt)
    rhs = (1 - alpha) * hto(p, s) + alpha * p.hto_max
    pu = cubic_value(c, u)
    scaled = p.pressure * p.v_sep_g / p.gas_const * (rhs - lhs)
    assert abs(pu - scaled) <= 1e-9 * max(1.0, abs(pu))
    assert (pu >= 0) == (lhs <= rhs) or abs(pu) < 1e-15


@given(states)
def test_coefficient_signs(s):
    c = cbf_coefficients(P, s, 25.0, 0.8, 1.0)
    assert c.k1 >= 0 and c.k2 >= 0 and c.k3 >= 0


# ----------------------------------------------------------- root finding

def test_quadratic_roots_stable():
    assert quadratic_roots(1.0, -3.0, 2.0) == pytest.approx([1.0, 2.0])
    r = quadratic_roots(1.0, -1e8, 1.0)
    assert r[0] == pytest.approx(1e-8, rel=1e-12)
    assert quadratic_roots(1.0, 0.0, 1.0) == []
    assert quadratic_roots(0.0, 2.0, -4.0) == [2.0]


@pytest.mark.parametrize("roots", [(1.0, 2.0, 3.0), (1.0, 1.0, 3.0), (2.0, 2.0, 2.0),
                                   (-1.0, 0.5, 4.0), (1e-3, 1e-3 + 1e-9, 7.0)])
def test_cubic_roots_known(roots):
    a3, a2, a1, a0 = np.poly(roots)
    got = cubic_real_roots(a3, a2, a1, a0)
    for r in set(roots):
        assert min(abs(g - r) for g in got) < 1e-4 * max(1.0, abs(r))
    for g in got:
        assert abs(np.polyval([a3, a2, a1, a0], g)) < 1e-9


@given(st.floats(0.01, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_cubic_roots_vs_numpy(a3, a2, a1, a0):
    got = cubic_real_roots(a3, a2, a1, a0)
    want = sorted(r.real for r in np.roots([a3, a2, a1, a0]) if abs(r.imag) < 1e-7)
    assert got == sorted(got)
    scale = max(abs(a3), abs(a2), abs(a1), abs(a0))
    for g in got:
        assert abs(np.polyval([a3, a2, a1, a0], g)) <= 1e-8 * scale * max(1.0, abs(g)) ** 3
    # every well-separated numpy root is found
    for w in want:
        if all(abs(w - v) > 1e-3 for v in want if v is not w):
            assert min((abs(g - w) for g in got), default=math.inf) < 1e-6 * max(1.0, abs(w))


def test_bracketed_roots_match_closed_form():
    coeffs = (2.0, -7.0, 2.0, 3.0)
    assert bracketed_cubic_roots(*coeffs) == pytest.approx(cubic_real_roots(*coeffs), abs=1e-12)


# ----------------------------------------------------------- regions

def test_whole_box_when_positive():
    c = CbfCoefficients(k1=1.0, k2=0.0, k3=1.0, k41=1.0, k42=0.0)
    assert nonneg_region(c, (0.0, 5.0)).intervals == ((0.0, 5.0),)


def test_degenerate_quadratic_region():
    c = CbfCoefficients(k1=0.0, k2=2.0, k3=0.0, k41=8.0, k42=0.0)
    (lo, hi), = nonneg_region(c, (0.0, 5.0)).intervals
    assert lo == 0.0 and hi == pytest.approx(2.0, rel=1e-12)
    (lo, hi), = nonneg_region(c, (0.0, 1.5)).intervals
    assert (lo, hi) == (0.0, 1.5)


def test_empty_and_two_interval_regions():
    neg = CbfCoefficients(k1=0.0, k2=1.0, k3=0.0, k41=0.0, k42=1.0)
    assert nonneg_region(neg, (0.0, 3.0)).empty
    # (u-1)(u-2)(u-4) >= 0 on [0, 5] -> [1, 2] and [4, 5]
    a3, a2, a1, a0 = np.poly([1.0, 2.0, 4.0])
    c = CbfCoefficients(k1=a3, k2=-a2, k3=a1, k41=a0, k42=0.0)
    region = nonneg_region(c, (0.0, 5.0))
    assert len(region.intervals) == 2
    (l1, h1), (l2, h2) = region.intervals
    assert (l1, h1, l2, h2) == pytest.approx((1.0, 2.0, 4.0, 5.0), abs=1e-9)
    assert region.u_minus == l1


def test_touching_root_kept_as_point():
    # -(u-2)^2 touches zero at u = 2 only
    c = CbfCoefficients(k1=0.0, k2=1.0, k3=4.0, k41=-4.0, k42=0.0)
    region = nonneg_region(c, (0.0, 5.0))
    assert len(region.intervals) == 1
    lo, hi = region.intervals[0]
    assert lo == pytest.approx(2.0, abs=1e-6) and hi == pytest.approx(2.0, abs=1e-6)


def test_region_matches_grid_scan_on_random_cubics():
    rng = np.random.default_rng(11)
    grid = np.arange(0.0, 5.0 + 1e-12, 1e-4)
    step = 1e-4
    for _ in range(1000):
        roots = rng.uniform(-1.0, 6.0, 3)
        lead = rng.choice([-1.0, 1.0]) * 10 ** rng.uniform(-3, 1)
        a3, a2, a1, a0 = lead * np.poly(roots)
        c = CbfCoefficients(k1=a3, k2=-a2, k3=a1, k41=a0, k42=0.0)
        region = nonneg_region(c, (0.0, 5.0))
        assert len(region.intervals) <= 2
        assert all(h >= l for l, h in region.intervals)
        assert all(region.intervals[k][1] < region.intervals[k + 1][0]
                   for k in range(len(region.intervals) - 1))
        vals = np.polyval([a3, a2, a1, a0], grid)
        inside = np.zeros_like(grid, dtype=bool)
        for lo, hi in region.intervals:
            inside |= (grid >= lo - step) & (grid <= hi + step)
        # every grid point where the cubic is clearly nonnegative is covered
        assert not np.any((vals > 1e-9 * c.scale) & ~inside)
        strict = np.zeros_like(grid, dtype=bool)
        for lo, hi in region.intervals:
            strict |= (grid >= lo + step) & (grid <= hi - step)
        assert not np.any((vals < -1e-9 * c.scale) & strict)
        for lo, hi in region.intervals:
            for e in (lo, hi):
                if e not in (0.0, 5.0):
                    assert abs(cubic_value(c, e)) <= 1e-9 * c.scale


@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 10))
def test_admissible_set_nearest_ties_to_smaller(a, gap, u):
    s = AdmissibleSet(((0.0, a), (a + gap, a + gap + 1.0)))
    x = s.nearest(u)
    assert s.contains(x)
    d = abs(x - u)
    for lo, hi in s.intervals:
        assert d <= abs(min(max(u, lo), hi) - u) + 1e-15


def test_admissible_set_exact_tie_goes_to_smaller():
    s = AdmissibleSet(((0.0, 1.0), (3.0, 4.0)))
    assert s.nearest(2.0) == 1.0
    assert s.nearest(2.5) == 3.0
    with pytest.raises(ValueError):
        AdmissibleSet(()).nearest(1.0)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from electro_coord.cbf import AdmissibleSet
from electro_coord.config import ElectrolyzerParams
from electro_coord.plant import ElectrolyzerState, electrolyzer_power, max_current, max_power
from electro_coord.safety import (
    EmptyAdmissibleSetError,
    admissible_set,
    box_bounds,
    brute_force_project,
    feasibility_check,
    objective,
    project,
)
from instances import random_projection_instance

P = ElectrolyzerParams()


def power(p, st_, u):
    return electrolyzer_power(p, st_.t_ele, u)


# ------------------------------------------------------------------ box

def test_ramp_arithmetic():
    p = ElectrolyzerParams(delta_i_max=3.0)
    b = box_bounds(p, ElectrolyzerState(25.0), 0.0, 1.0)
    assert b.lower == 0.0 and b.ramp_cap == 3.0 and b.upper == 3.0
    b = box_bounds(p, ElectrolyzerState(25.0), 10.0, 1.0)
    assert b.lower == 7.0 and b.ramp_cap == 13.0


def test_voltage_cap_matches_max_current():
    b = box_bounds(P, ElectrolyzerState(25.0), 10.0, 1.0)
    assert b.voltage_cap == pytest.approx(max_current(P, 25.0), rel=1e-15)
    assert b.voltage_cap == pytest.approx(15.772, abs=1e-3)


@given(st.floats(10, 80))
def test_power_cap_root_residual(t):
    b = box_bounds(P, ElectrolyzerState(t), 5.0, 1.0)
    r = P.rho1 + P.rho2 * t
    p_max = max_power(P, t)
    assert b.power_cap >= 0
    assert abs(P.u_rev * b.power_cap + r * b.power_cap ** 2 - p_max) <= 1e-9 * p_max


def test_box_lower_nonnegative_and_empty_flag():
    b = box_bounds(P, ElectrolyzerState(25.0), 1.0, 1.0)
    assert b.lower == 0.0 and not b.empty
    b = box_bounds(P, ElectrolyzerState(25.0), 40.0, 1.0)
    assert b.empty


def test_admissible_set_inside_box():
    s = ElectrolyzerState(40.0, 1e-4, 1e-4, 1e-8)
    box, _, region = admissible_set(P, s, 8.0, 25.0, 0.8, 1.0)
    assert region.u_minus >= box.lower and region.u_max <= box.upper


# ------------------------------------------------------------ feasibility

def test_zero_floor_always_holds():
    sets = [AdmissibleSet(((0.0, 5.0),))] * 2
    rep = feasibility_check(sets, [P, P], [ElectrolyzerState(25.0)] * 2, 0.0)
    assert rep.proposition1_holds and not rep.relaxed and rep.p_min_reach == 0.0


def test_empty_unit_fails_regardless_of_wind():
    sets = [AdmissibleSet(((0.0, 5.0),)), AdmissibleSet(())]
    rep = feasibility_check(sets, [P, P], [ElectrolyzerState(25.0)] * 2, 1e9)
    assert not rep.proposition1_holds and rep.relaxed
    assert rep.per_unit_nonempty == (True, False)


def test_forced_minimum_current_exceeds_wind():
    states = [ElectrolyzerState(30.0)] * 4
    sets = [AdmissibleSet(((2.0, 6.0),))] * 4
    reach = 4 * power(P, states[0], 2.0)
    rep = feasibility_check(sets, [P] * 4, states, reach - 1.0)
    assert not rep.proposition1_holds and rep.p_min_reach == pytest.approx(reach)
    assert feasibility_check(sets, [P] * 4, states, reach).proposition1_holds


# ------------------------------------------------------------- projection

def test_interior_point_returned():
    sets = [AdmissibleSet(((0.0, 5.0),)), AdmissibleSet(((1.0, 4.0), (6.0, 9.0)))]
    states = [ElectrolyzerState(30.0)] * 2
    res = project([2.0, 7.0], sets, [P, P], states, 1e6)
    assert res.u == [2.0, 7.0] and not res.coupling_active and res.objective == 0.0


def test_single_interval_clamp():
    res = project([7.0], [AdmissibleSet(((2.0, 5.0),))], [P], [ElectrolyzerState(30.0)], 1e6)
    assert res.u == [5.0]


def test_tie_goes_to_smaller_current():
    s = AdmissibleSet(((0.0, 1.0), (3.0, 4.0)))
    res = project([2.0], [s], [P], [ElectrolyzerState(30.0)], 1e6)
    assert res.u == [1.0]


def test_relaxed_branch_is_stage_one():
    sets = [AdmissibleSet(((3.0, 6.0),))] * 2
    states = [ElectrolyzerState(30.0)] * 2
    res = project([10.0, 1.0], sets, [P, P], states, 0.0, relaxed=True)
    assert res.u == [6.0, 3.0] and res.relaxed and not res.coupling_active
    storage = max(0.0, sum(power(P, s, u) for s, u in zip(states, res.u)) - 0.0)
    assert storage > 0


def test_empty_set_raises():
    with pytest.raises(EmptyAdmissibleSetError):
        project([1.0], [AdmissibleSet(())], [P], [ElectrolyzerState(30.0)], 1e6)
    with pytest.raises(EmptyAdmissibleSetError):
        project([1.0], [AdmissibleSet(())], [P], [ElectrolyzerState(30.0)], 1e6, relaxed=True)


def test_binding_cap_meets_power_exactly():
    sets = [AdmissibleSet(((0.0, 10.0),))] * 3
    states = [ElectrolyzerState(t) for t in (25.0, 40.0, 60.0)]
    res = project([10.0] * 3, sets, [P] * 3, states, 1000.0)
    total = sum(power(P, s, u) for s, u in zip(states, res.u))
    assert res.coupling_active
    tol_power = 1e-9 * sum(power(P, s, 10.0) for s in states)
    assert 1000.0 - tol_power <= total <= 1000.0
    # equal references: the cooler, more resistive unit carries less current
    assert res.u[0] < res.u[1] < res.u[2]


def test_coupling_inactive_single_intervals_equals_clamping():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        sets, states = [], []
        for _ in range(n):
            a, b = np.sort(rng.uniform(0, 15, 2))
            sets.append(AdmissibleSet(((float(a), float(b)),)))
            states.append(ElectrolyzerState(float(rng.uniform(20, 80))))
        u_des = rng.uniform(-3, 18, n).tolist()
        res = project(u_des, sets, [P] * n, states, 1e9)
        assert res.u == [min(max(d, s.intervals[0][0]), s.intervals[0][1]) for d, s in zip(u_des, sets)]


def _residuals(u, sets, params, states, p_wind):
    member = max(min((max(lo - x, x - hi, 0.0) for lo, hi in s.intervals)) for x, s in zip(u, sets))
    total = sum(power(p, s, x) for p, s, x in zip(params, states, u))
    return member, max(0.0, total - p_wind)


def test_random_instances_against_grid_oracle():
    rng = np.random.default_rng(2024)
    step = 1e-3
    for n, count, width in ((1, 150, None), (2, 200, 6.0), (3, 150, 0.8)):
        for _ in range(count):
            u_des, sets, params, states, p_wind = random_projection_instance(rng, n, width)
            rep = feasibility_check(sets, params, states, p_wind)
            assert rep.proposition1_holds
            res = project(u_des, sets, params, states, p_wind)
            member, coupling = _residuals(res.u, sets, params, states, p_wind)
            assert member <= 1e-8 and coupling <= 1e-8
            ref = brute_force_project(u_des, sets, params, states, p_wind, grid_step=step)
            assert max(_residuals(ref, sets, params, states, p_wind)) <= 1e-8
            assert res.objective <= objective(ref, u_des) + step ** 2


def test_brute_force_returns_certificate_when_unique():
    sets = [AdmissibleSet(((2.0, 5.0),)), AdmissibleSet(((1.0, 3.0),))]
    states = [ElectrolyzerState(30.0)] * 2
    p_wind = power(P, states[0], 2.0) + power(P, states[1], 1.0)
    u = brute_force_project([5.0, 3.0], sets, [P, P], states, p_wind)
    assert u == pytest.approx([2.0, 1.0], abs=1e-12)
    res = project([5.0, 3.0], sets, [P, P], states, p_wind)
    assert res.u == pytest.approx([2.0, 1.0], abs=1e-9)


def test_brute_force_interior_and_limits():
    sets = [AdmissibleSet(((0.0, 5.0),))] * 2
    states = [ElectrolyzerState(30.0)] * 2
    assert brute_force_project([1.0, 2.0], sets, [P, P], states, 1e6) == pytest.approx([1.0, 2.0])
    with pytest.raises(ValueError):
        brute_force_project([1.0] * 4, sets * 2, [P] * 4, states * 2, 1e6)


def test_many_intervals_fall_back_to_minimum_pieces():
    sets = [AdmissibleSet(((0.0, 1.0), (4.0, 6.0)))] * 7
    states = [ElectrolyzerState(40.0)] * 7
    res = project([5.0] * 7, sets, [P] * 7, states, 50.0)
    assert res.restricted and res.coupling_active
    assert all(0.0 <= x <= 1.0 for x in res.u)
    assert sum(power(P, states[0], x) for x in res.u) <= 50.0

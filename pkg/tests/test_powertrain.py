import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hess_codesign import powertrain as pt
from oracles import shepherd_discharge

BP = pt.BatteryParams()
DP = pt.DegradationParams()
SP = pt.ScParams(n_sc=32)


def test_full_charge_open_circuit_voltage():
    assert pt.shepherd_voltage(0.0, 0.0, BP) == 3.43 + 0.761


def test_one_c_load_at_full_charge():
    # only the polarization and ohmic terms act at it = 0
    expected = 4.191 - (8.85e-5 * 55 + 1.33e-3 * 55)
    assert pt.shepherd_voltage(0.0, 55.0, BP) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(it=st.floats(0, 50), i=st.floats(0, 300))
def test_discharge_branch_matches_hand_formula(it, i):
    ref = shepherd_discharge(it, i, BP.E0, BP.K, BP.Q_max, BP.R, BP.A_exp, BP.B_exp)
    assert pt.shepherd_voltage(it, i, BP) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_charge_branch_guarded_at_singularity():
    v = pt.shepherd_voltage(0.1 * BP.Q_max, -10.0, BP)
    assert math.isfinite(v)


def test_battery_depleted_at_full_discharge():
    with pytest.raises(pt.BatteryDepleted):
        pt.battery_terminal_voltage(pt.BatteryState(0.0, BP.Q_max, 0.0), 1.0, BP)


def test_current_from_power_efficiency_direction():
    assert pt.battery_current_from_power(1000.0, 10, 4.0, BP) == pytest.approx(1000 / (10 * 4 * 0.96))
    assert pt.battery_current_from_power(-1000.0, 10, 4.0, BP) == pytest.approx(-1000 * 0.96 / 40)


def test_step_battery_soc_floor():
    s = pt.BatteryState.from_soc(20.5, BP)
    with pytest.raises(pt.BatteryDepleted) as exc:
        for _ in range(1000):
            s = pt.step_battery(s, 263 * 3.5 * 55, 1.0, 263, BP, soc_floor=20.0)
    assert exc.value.state.soc < 20.0


def test_step_battery_rejects_bad_dt():
    with pytest.raises(ValueError):
        pt.step_battery(pt.BatteryState(), 1.0, 0.0, 10, BP)


def test_battery_count_table_value():
    assert pt.battery_count(320.0, 32, 0.52, 1.15) == 263


@settings(max_examples=100, deadline=None)
@given(m=st.floats(10, 1000), n=st.integers(0, 200))
def test_battery_count_is_largest_fitting(m, n):
    try:
        k = pt.battery_count(m, n, 0.52, 1.15)
    except pt.SizingError:
        assert m - n * 0.52 <= 0
        return
    assert k * 1.15 + n * 0.52 <= m
    assert (k + 1) * 1.15 + n * 0.52 > m - 1e-9


def test_fit_arithmetic():
    assert float(pt.activation_energy(1.0, DP)) == pytest.approx(46397.7, abs=1e-6)
    assert float(pt.log_pre_exponential(0.0, DP)) == pytest.approx(10.524, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(ah=st.floats(1e-3, 1e6), c=st.floats(0.1, 5.0), k=st.floats(1.01, 10))
def test_capacity_loss_increases_with_throughput(ah, c, k):
    assert pt.capacity_loss(ah * k, c, DP) > pt.capacity_loss(ah, c, DP)


def test_capacity_loss_power_law():
    ratio = pt.capacity_loss(2000.0, 1.0, DP) / pt.capacity_loss(1000.0, 1.0, DP)
    assert ratio == pytest.approx(2 ** DP.z, rel=1e-12)


def test_eol_throughput_inverts_loss():
    for c in (0.5, 1.0, 2.0):
        ah = pt.eol_throughput(c, DP)
        assert pt.capacity_loss(ah, c, DP) == pytest.approx(20.0, rel=1e-10)


def test_life_halves_when_throughput_per_lap_doubles():
    a = pt.cycle_life_objective(40.0, 1.0, DP, BP)
    b = pt.cycle_life_objective(40.0, 2.0, DP, BP)
    assert b == pytest.approx(a / 2, rel=1e-12)


def test_life_infinite_without_current():
    assert pt.cycle_life_objective(0.0, 1.0, DP, BP) == math.inf


def test_life_needs_positive_throughput():
    with pytest.raises(ValueError):
        pt.cycle_life_objective(10.0, 0.0, DP, BP)


def test_life_grows_when_same_lap_is_driven_at_lower_current():
    # Throughput per lap scales with the current for a fixed lap duration.
    lap_s = 300.0
    lives = [pt.cycle_life_objective(c * 55, c * 55 * lap_s / 3600, DP, BP) for c in np.linspace(2, 1, 11)]
    assert all(b > a for a, b in zip(lives, lives[1:]))


def test_sc_derived_pack_values():
    assert SP.C_sct == pytest.approx(3400 / 32)
    assert SP.R_sct == pytest.approx(32 * 2.2e-4)
    assert SP.V_ctmax == pytest.approx(32 * 2.85)


@settings(max_examples=100, deadline=None)
@given(v=st.floats(5, 91), frac=st.floats(-1, 1))
def test_sc_current_solves_power_balance(v, frac):
    eta = 0.96 * 0.95
    R = SP.R_sct
    p = frac * float(pt.sc_max_discharge_power(v, R, eta))
    i = float(pt.sc_current(v, p, R, eta))
    delivered = (v - R * i) * i
    target = p / eta if p >= 0 else p * eta
    assert delivered == pytest.approx(target, rel=1e-9, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(soe=st.floats(0.1, 0.99))
def test_power_window_respects_limits(soe):
    v = math.sqrt(soe) * SP.V_ctmax
    eta = 0.96 * 0.95
    p_min, p_max, i_lo, i_hi = pt.sc_power_limits(v, SP.C_sct, SP.R_sct, SP.V_ctmax, eta, 1.0)
    assert p_min <= 0 <= p_max
    assert -2000 <= i_lo <= 0 <= i_hi <= 2000
    for p, i_lim in ((p_max, i_hi), (p_min, i_lo)):
        i = float(pt.sc_current(v, p, SP.R_sct, eta))
        assert abs(i) <= abs(i_lim) * (1 + 1e-9) + 1e-9
        v_next = v - i / SP.C_sct
        assert 0.1 - 1e-9 <= (v_next / SP.V_ctmax) ** 2 <= 0.99 + 1e-9


def test_step_supercapacitor_energy_direction():
    s = pt.ScState.from_soe(0.5, SP)
    dis, p_dis = pt.step_supercapacitor(s, 20e3, 1.0, SP, 0.96)
    chg, p_chg = pt.step_supercapacitor(s, -20e3, 1.0, SP, 0.96)
    assert dis.soe < 0.5 < chg.soe
    assert p_dis > 0 > p_chg


def test_step_supercapacitor_drops_request_outside_band():
    s = pt.ScState.from_soe(0.1, SP)
    new, p = pt.step_supercapacitor(s, 5e3, 1.0, SP, 0.96)
    assert p == 0.0 and new.v_ct == s.v_ct


def test_soc_it_identity_random_steps(rng):
    s = pt.BatteryState.from_soc(90.0, BP)
    worst = 0.0
    for p in rng.uniform(-40e3, 80e3, 10_000):
        try:
            s = pt.step_battery(s, p, 1.0, 263, BP)
        except pt.BatteryDepleted:
            s = pt.BatteryState.from_soc(90.0, BP)
            continue
        worst = max(worst, abs(s.soc - 100.0 * (1.0 - s.it / BP.Q_max)))
    assert worst <= 1e-9

import numpy as np
import pytest

from hess_codesign.cycle import (
    DriveCycleError,
    VehicleParams,
    demand_power,
    load_drive_cycle,
    make_cycle,
    synthesize_test_cycle,
    write_drive_cycle,
)

VP = VehicleParams()


def test_drag_unit_conversion():
    assert VP.rho_cd_a == pytest.approx(0.075 * 3.6**2)
    assert VehicleParams.from_kmh_drag(0.075) == VP


def test_demand_power_hand_value():
    v, a = 20.0, 1.5
    expected = (0.5 * 0.075 * 3.6**2 * v**2 + 0.016 * 570 * 9.81 + 570 * a) * v
    assert demand_power(v, a, VP) == pytest.approx(expected, rel=1e-12)


def test_standstill_needs_no_power():
    assert demand_power(0.0, 0.0, VP) == 0.0


def test_hard_braking_is_negative():
    assert demand_power(30.0, -8.0, VP) < 0


def test_forward_difference_acceleration():
    c = make_cycle([0, 1, 2, 3], [0, 2, 3, 3], VP)
    assert c.a.tolist() == [2.0, 1.0, 0.0, 0.0]
    assert c.lap_length_t == 4.0


def test_cycle_arrays_read_only():
    c = make_cycle([0, 1], [0, 1], VP)
    with pytest.raises(ValueError):
        c.v[0] = 3.0


def test_round_trip(tmp_path):
    c = synthesize_test_cycle(duration=40, seed=3)
    write_drive_cycle(tmp_path / "c.csv", c)
    assert load_drive_cycle(tmp_path / "c.csv", VP) == c


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        load_drive_cycle(tmp_path / "nope.csv", VP)


@pytest.mark.parametrize(
    "body, row",
    [
        ("t,v\n0,0\n1,x\n", "row 2"),
        ("t,v\n0,0\n1,1\n3,2\n", "row 3"),
        ("t,v\n0,0\n1,-1\n", "row 2"),
        ("t,v\n0,0\n0,1\n", "row 2"),
        ("t,v\n0,0\n1,1,1\n", "row 2"),
    ],
)
def test_malformed_rows_reported(tmp_path, body, row):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DriveCycleError, match=row):
        load_drive_cycle(p, VP)


def test_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,speed\n0,0\n1,1\n")
    with pytest.raises(DriveCycleError, match="header"):
        load_drive_cycle(p, VP)


def test_synthetic_lap_shape():
    c = synthesize_test_cycle()
    assert c.n_samples == 300 and c.dt == 1.0
    assert c.v[0] == 0.0 and c.v[-1] == 0.0
    assert c.v.max() == pytest.approx(50.0)
    assert c.a.max() <= 4.5 + 1e-12 and c.a.min() >= -9.0 - 1e-12
    assert (c.p_dem < 0).any() and (c.p_dem > 0).any()


def test_synthetic_is_seeded():
    assert synthesize_test_cycle(seed=4) == synthesize_test_cycle(seed=4)
    assert synthesize_test_cycle(seed=4) != synthesize_test_cycle(seed=5)


def test_zero_peak_is_standstill():
    c = synthesize_test_cycle(v_peak=0.0)
    assert not c.v.any() and not c.p_dem.any()


def test_too_short_duration():
    with pytest.raises(ValueError):
        synthesize_test_cycle(duration=5)


def test_energy_balance_sign():
    c = synthesize_test_cycle()
    traction = np.sum(np.maximum(c.p_dem, 0)) * c.dt
    regen = -np.sum(np.minimum(c.p_dem, 0)) * c.dt
    assert traction > regen > 0

"""Closed-form checks of the valve latency model and the strain law."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from softsnake.pneumatics import (ChannelBank, PneumaticChannel, StrainLaw,
                                  PSI_TO_PA, route_antagonistic,
                                  update_pressure)


def test_inflation_first_step_exact():
    # from 0 toward 8 psi: dp = 1, step = 8 * 1^2 * 0.23 = 1.84
    assert update_pressure(0.0, 8.0) == pytest.approx(1.84, abs=1e-12)


def test_inflation_approaches_target_and_caps():
    # the quadratic law closes the gap like p_s / (k * n), never overshooting
    p = 0.0
    n = 400
    for _ in range(n):
        p = update_pressure(p, 8.0)
        assert p <= 8.0
    assert 8.0 - p <= 8.0 / (0.23 * n) * 1.1


def test_inflation_never_overshoots():
    p = update_pressure(7.999, 8.0)
    assert p <= 8.0


def test_deflation_linear_phase():
    # while p * k_d > cap the drop is the cap, 0.68 psi per tick
    p = 8.0
    while p * 0.23 > 0.68:
        nxt = update_pressure(p, 0.0)
        assert p - nxt == pytest.approx(0.68, abs=1e-12)
        p = nxt


def test_deflation_geometric_phase_ratio():
    # below cap / k_d = 2.9565 psi each tick multiplies by 1 - 0.23
    p = 2.0
    nxt = update_pressure(p, 0.0)
    assert nxt / p == pytest.approx(0.77, abs=1e-12)


def test_deflation_phase_boundary():
    boundary = 0.68 / 0.23
    assert boundary == pytest.approx(2.9565, abs=1e-4)


def test_pressure_fixed_point_at_target():
    assert update_pressure(5.0, 5.0) == 5.0


def test_deflation_stops_at_zero():
    assert update_pressure(1e-9, 0.0) >= 0.0


@given(st.floats(0.0, 8.0), st.floats(0.0, 8.0))
def test_pressure_stays_in_range(p, target):
    out = update_pressure(p, target)
    assert 0.0 <= out <= 8.0


@given(st.floats(0.0, 8.0))
def test_inflation_monotone_in_gap(p):
    # a larger gap to the target never inflates more slowly
    lo = update_pressure(p, min(p + 1.0, 8.0)) - p
    hi = update_pressure(p, 8.0) - p
    assert hi >= lo - 1e-12


def test_strain_at_55158_pa():
    law = StrainLaw(66243.0)
    assert law.strain_pa(55158.0) == pytest.approx(1.8327, abs=1e-4)


def test_strain_psi_conversion():
    law = StrainLaw(66243.0)
    assert law.strain(8.0) == pytest.approx(1.0 + 8.0 * PSI_TO_PA / 66243.0,
                                            rel=1e-12)


def test_strain_zero_pressure_is_identity():
    assert StrainLaw(66243.0).strain(0.0) == 1.0


def test_route_antagonistic_signs():
    assert route_antagonistic(3.0) == (0.0, 3.0)
    assert route_antagonistic(-3.0) == (3.0, 0.0)
    assert route_antagonistic(0.0) == (0.0, 0.0)


def test_channel_tick_matches_update_pressure():
    ch = PneumaticChannel()
    seq = []
    for _ in range(5):
        seq.append(ch.tick(8.0))
    p = 0.0
    for got in seq:
        p = update_pressure(p, 8.0)
        assert got == pytest.approx(p, rel=1e-15)


def test_bank_routes_per_link():
    bank = ChannelBank.create(2)
    bank.tick(np.array([8.0, -8.0]))
    # link 0 positive: right chamber (index 1) inflates
    assert bank.pressures[0] == 0.0
    assert bank.pressures[1] == pytest.approx(1.84)
    # link 1 negative: left chamber (index 2) inflates
    assert bank.pressures[2] == pytest.approx(1.84)
    assert bank.pressures[3] == 0.0


def test_bank_no_latency_snaps():
    bank = ChannelBank.create(1)
    bank.tick(np.array([5.0]), latency=False)
    assert bank.pressures[1] == 5.0
    bank.tick(np.array([0.0]), latency=False)
    assert bank.pressures[1] == 0.0


def test_bank_vents_opposite_side():
    bank = ChannelBank.create(1)
    for _ in range(50):
        bank.tick(np.array([8.0]))
    # flip the sign: right must deflate while left inflates
    p_right = bank.pressures[1]
    bank.tick(np.array([-8.0]))
    assert bank.pressures[1] < p_right
    assert bank.pressures[0] > 0.0

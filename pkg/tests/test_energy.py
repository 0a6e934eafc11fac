import io

import pytest
from hypothesis import given, strategies as st

from gac.energy import (
    PowerProfile,
    SchemeKind,
    average_current_mA,
    charge_per_hour_mAh,
    load_profile,
    savings_ratio,
)
from gac.errors import DomainError

S = SchemeKind
P = PowerProfile()


def test_table_anchors():
    assert P.gps_current_mA == 135
    assert (P.accel_normal_mA, P.accel_ui_mA, P.accel_game_mA, P.accel_fastest_mA) == (15, 25, 90, 95)


@pytest.mark.parametrize("T", [1, 10, 60, 1e6])
def test_gps_continuous(T):
    assert average_current_mA(S.GPS_CONTINUOUS, T) == 135
    assert savings_ratio(S.GPS_CONTINUOUS, T) == 1.0


def test_duty_cycle_examples():
    assert average_current_mA(S.GAC_ACC_FREE, 60) == pytest.approx(135 * 5 / 60)
    assert average_current_mA(S.GAC_ACC_FREE, 60) == pytest.approx(11.25)
    assert average_current_mA(S.GAC, 60) == pytest.approx(26.25)
    assert average_current_mA(S.ENLOC, 60) == average_current_mA(S.GAC_ACC_FREE, 60)


def test_charge_per_hour():
    assert charge_per_hour_mAh(S.GPS_CONTINUOUS, 60) == 135
    assert charge_per_hour_mAh(S.GAC_ACC_FREE, 3600) == pytest.approx(0.1875)
    assert charge_per_hour_mAh(S.GAC, 3600) == pytest.approx(15.1875)


def test_savings_ratio():
    assert savings_ratio(S.GAC_ACC_FREE, 60) == pytest.approx(12.0, abs=1e-12)
    assert savings_ratio(S.GAC, 60) == pytest.approx(135 / 26.25)


@pytest.mark.parametrize("scheme", [S.GAC, S.GAC_ACC_FREE, S.ENLOC])
def test_period_shorter_than_fix_rejected(scheme):
    with pytest.raises(DomainError):
        average_current_mA(scheme, 4.9)
    assert average_current_mA(scheme, 1.0, PowerProfile(fix_duration_s=1.0)) >= 135


def test_profile_validation():
    with pytest.raises(DomainError):
        PowerProfile(gps_current_mA=0)


def test_load_profile():
    p = load_profile(io.StringIO("# measured\ngps_current_mA = 120\nfix_duration_s=2\n\n"))
    assert p == PowerProfile(gps_current_mA=120, fix_duration_s=2)
    with pytest.raises(DomainError):
        load_profile(["bogus=1"])
    with pytest.raises(DomainError):
        load_profile(["gps_current_mA=abc"])


periods = st.floats(5, 1e5)


@given(periods, periods)
def test_strictly_decreasing(t1, t2):
    lo, hi = sorted((t1, t2))
    if hi - lo < 1e-9 * hi:
        return  # the +15 mA sum cannot resolve a last-bit difference in the period
    for s in (S.GAC, S.GAC_ACC_FREE, S.ENLOC):
        assert average_current_mA(s, lo) > average_current_mA(s, hi)
    assert average_current_mA(S.GAC, hi) > P.accel_normal_mA


@given(periods)
def test_gap_and_equality(T):
    assert average_current_mA(S.GAC, T) - average_current_mA(S.GAC_ACC_FREE, T) == pytest.approx(15.0, abs=1e-12)
    assert average_current_mA(S.ENLOC, T) == average_current_mA(S.GAC_ACC_FREE, T)


def test_asymptotes():
    assert savings_ratio(S.GAC, 1e12) == pytest.approx(9.0, rel=1e-9)
    assert savings_ratio(S.GAC_ACC_FREE, 1e12) > 1e9

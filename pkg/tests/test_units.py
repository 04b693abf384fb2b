import math

import pytest
from hypothesis import given, strategies as st

from heom1f import units


def test_parse_frequency_units():
    assert units.parse_frequency("10 kHz") == pytest.approx(2 * math.pi * 1e-5)
    assert units.parse_frequency("0.5148GHz") == pytest.approx(2 * math.pi * 0.5148)
    assert units.parse_frequency("1e3 MHz") == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("bad", [5.0, "5", "5 THz", "GHz", "1 ghz"])
def test_parse_frequency_rejects(bad):
    with pytest.raises(ValueError):
        units.parse_frequency(bad)


@given(st.floats(min_value=1e-6, max_value=1e3), st.sampled_from(["Hz", "kHz", "MHz", "GHz"]))
def test_angular_round_trip(value, unit):
    assert units.ordinary(units.angular(value, unit), unit) == pytest.approx(value, rel=1e-12)


def test_beta_at_50_mK():
    # hbar / (k_B * 50 mK) in ns
    assert units.beta_from_temperature(0.05) == pytest.approx(0.15276465155155293, rel=1e-8)
    with pytest.raises(ValueError):
        units.beta_from_temperature(0.0)


def test_eta_conventions():
    assert units.eta_from_convention(1.0, "text") == 1.0
    assert units.eta_from_convention(1.0, "table") == pytest.approx(2 * math.pi)
    assert units.eta_from_convention(1.0, "ordinary") == pytest.approx(1 / (2 * math.pi) ** 2)
    with pytest.raises(ValueError):
        units.eta_from_convention(1.0, "other")

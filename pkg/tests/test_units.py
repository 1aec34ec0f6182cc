import numpy as np
import pytest

from flexagg import units


def test_mhz_to_angular_is_two_pi():
    assert units.mhz_to_angular(1.0) == 2.0 * np.pi
    assert np.isclose(units.mhz_to_angular(976.0), 6132.38886, rtol=1e-8)
    assert np.isclose(units.mhz_to_angular(5400.0), 33929.200659, rtol=1e-8)


def test_mass_internal_frozen_value():
    # 1e-26 kg expressed in the um/us/angular-frequency system
    m = units.mass_to_internal(1.0e-26)
    assert np.isclose(m, 94.82521568, rtol=1e-8)


def test_thermal_velocity_width():
    m = units.mass_to_internal(1.0e-26)
    sv = units.thermal_velocity_sigma(m, 0.3)
    assert np.isclose(sv, 0.03515257, atol=1e-7)
    # inverse relation: wider position spread, narrower velocity spread
    assert units.thermal_velocity_sigma(m, 0.6) == pytest.approx(sv / 2)


def test_lifetime_two_channels():
    tau = units.lifetime_estimate(70.0, 232.0, 3, 2)
    assert np.isclose(tau, 19.42578, atol=1e-4)


def test_lifetime_single_channel_limits():
    assert units.lifetime_estimate(70.0, 232.0, 1, 0) == pytest.approx(70.0)
    assert units.lifetime_estimate(70.0, 232.0, 0, 1) == pytest.approx(232.0)


def test_lifetime_rejects_bad_input():
    with pytest.raises(ValueError):
        units.lifetime_estimate(-1.0, 232.0, 3, 2)
    with pytest.raises(ValueError):
        units.lifetime_estimate(70.0, 0.0, 3, 2)
    with pytest.raises(ValueError):
        units.lifetime_estimate(70.0, 232.0, 0, 0)

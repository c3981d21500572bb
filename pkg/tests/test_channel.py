import math

import pytest

from uowloc.channel import (
    AttenuationMode,
    ChannelParams,
    WaterType,
    attenuation,
    gain_factor,
    toa_to_distance,
    water_preset,
)
from uowloc.errors import InvalidChannel


class TestGainFactor:
    def test_reference_value(self):
        # P*A*cos(0) / (2*pi*(1 - cos(30 deg))) at P=1, A=0.01
        p = ChannelParams(transmit_power=1.0, aperture_area=0.01,
                          trajectory_angle=0.0, divergence_angle=math.pi / 6)
        expected = 0.01 / (2 * math.pi * (1 - math.cos(math.pi / 6)))
        assert gain_factor(p) == pytest.approx(expected, rel=1e-15)
        assert gain_factor(p) == pytest.approx(0.0118795, abs=5e-8)

    def test_zero_power(self):
        assert gain_factor(ChannelParams(transmit_power=0.0)) == 0.0

    def test_perpendicular_trajectory(self):
        p = ChannelParams(trajectory_angle=math.pi / 2)
        assert gain_factor(p) == pytest.approx(0.0, abs=1e-18)

    def test_zero_divergence_rejected(self):
        with pytest.raises(InvalidChannel):
            ChannelParams(divergence_angle=0.0)

    def test_linear_in_power_and_aperture(self):
        base = gain_factor(ChannelParams(transmit_power=1.0, aperture_area=0.01))
        assert gain_factor(ChannelParams(transmit_power=7.0, aperture_area=0.01)) == pytest.approx(7 * base)
        assert gain_factor(ChannelParams(transmit_power=1.0, aperture_area=0.03)) == pytest.approx(3 * base)


class TestAttenuation:
    def test_no_extinction(self):
        for mode in AttenuationMode:
            p = ChannelParams(extinction_coeff=0.0, attenuation_mode=mode)
            assert attenuation(p, 5.0) == 1.0

    def test_constant_exponent_value(self):
        p = ChannelParams(extinction_coeff=0.056)
        assert attenuation(p, 123.0) == pytest.approx(math.exp(-0.056), rel=1e-15)
        assert attenuation(p, 123.0) == pytest.approx(0.945539, abs=5e-7)

    def test_distance_dependent_value(self):
        p = ChannelParams(extinction_coeff=2.17,
                          attenuation_mode=AttenuationMode.DISTANCE_DEPENDENT)
        assert attenuation(p, 1.0) == pytest.approx(math.exp(-2.17), rel=1e-15)
        assert attenuation(p, 1.0) == pytest.approx(0.114178, abs=5e-7)

    def test_monotone_in_extinction_and_distance(self):
        coeffs = [0.0, 0.056, 0.5, 2.17, 5.0]
        for mode in AttenuationMode:
            values = [attenuation(ChannelParams(extinction_coeff=c, attenuation_mode=mode), 2.0)
                      for c in coeffs]
            assert all(a >= b for a, b in zip(values, values[1:]))
            assert all(0.0 < v <= 1.0 for v in values)
        p = ChannelParams(extinction_coeff=0.3,
                          attenuation_mode=AttenuationMode.DISTANCE_DEPENDENT)
        dist_values = [attenuation(p, d) for d in (0.0, 1.0, 5.0, 50.0)]
        assert all(a >= b for a, b in zip(dist_values, dist_values[1:]))
        p_const = ChannelParams(extinction_coeff=0.3)
        assert len({attenuation(p_const, d) for d in (0.0, 1.0, 5.0)}) == 1


class TestToaToDistance:
    def test_values(self):
        assert toa_to_distance(0.0) == 0.0
        assert toa_to_distance(1e-6) == pytest.approx(255.0, rel=1e-15)
        assert toa_to_distance(4e-7) == pytest.approx(102.0, rel=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            toa_to_distance(-1e-9)


class TestWaterPresets:
    def test_presets(self):
        assert water_preset(WaterType.PURE_OCEAN) == 0.056
        assert water_preset(WaterType.TURBID_HARBOR) == 2.17
        assert water_preset(WaterType.CUSTOM, 0.0) == 0.0
        assert water_preset(WaterType.CUSTOM, 1.25) == 1.25

    def test_custom_requires_value(self):
        with pytest.raises(InvalidChannel):
            water_preset(WaterType.CUSTOM)
        with pytest.raises(InvalidChannel):
            water_preset(WaterType.CUSTOM, -0.1)

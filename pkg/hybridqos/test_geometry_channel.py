import math

import numpy as np
import pytest

from hybridqos.geometry_channel import (DbConvention, FadingSampler, RfChannelSpec, ShadowingMode,
                                        VlcChannelSpec, cell_edge_position, cell_radius,
                                        linear_path_gain, rf_distance_to, rf_path_loss,
                                        sample_fading_power, shadowing_draw, vlc_gain)


def test_lambertian_index_at_sixty_degrees():
    assert VlcChannelSpec().lambertian_index == pytest.approx(1.0)


def test_lambertian_index_at_thirty_degrees():
    spec = VlcChannelSpec(half_intensity_angle_deg=30.0)
    assert spec.lambertian_index == pytest.approx(4.818, abs=1e-3)


def test_vlc_gain_at_nadir_and_at_the_usual_offset():
    nadir = vlc_gain(VlcChannelSpec(rx_position_m=(0.0, 0.0, -2.5)))
    assert nadir == pytest.approx(1e-4 / (math.pi * 2.5 ** 2), rel=1e-12)
    assert nadir == pytest.approx(5.093e-6, rel=1e-3)
    spec = VlcChannelSpec(rx_position_m=(1.6, 0.0, -2.5))
    assert spec.distance_m == pytest.approx(2.968, abs=1e-3)
    offset = vlc_gain(spec)
    assert offset == pytest.approx(2e-4 * 2.5 ** 2 / (2.0 * math.pi * 8.81 ** 2), rel=1e-12)
    assert 0.0 < offset < nadir


def test_vlc_gain_directly_below_led():
    spec = VlcChannelSpec(rx_position_m=(0.0, 0.0, -2.0))
    expected = 2.0 * 1e-4 * 2.0 ** 2 / (2.0 * math.pi * 2.0 ** 4)
    assert vlc_gain(spec) == pytest.approx(expected, rel=1e-12)


def test_vlc_gain_falls_off_with_offset():
    gains = [vlc_gain(VlcChannelSpec(rx_position_m=(x, 0.0, -2.5))) for x in (0.0, 1.0, 2.0, 3.0)]
    assert gains == sorted(gains, reverse=True)


def test_vlc_gain_is_zero_outside_field_of_view():
    spec = VlcChannelSpec(field_of_view_deg=30.0, rx_position_m=(3.0, 0.0, -1.0))
    assert vlc_gain(spec) == 0.0


def test_receiver_above_led_is_rejected():
    with pytest.raises(ValueError):
        VlcChannelSpec(rx_position_m=(0.0, 0.0, 1.0))


def test_cell_radius_and_edge():
    spec = VlcChannelSpec()
    radius = cell_radius(spec)
    assert radius == pytest.approx(2.5 * math.tan(math.radians(60.0)))
    assert cell_edge_position(spec) == pytest.approx((radius, 0.0, -2.5))


def test_rf_distance_is_floored_at_reference():
    rf = RfChannelSpec()
    assert rf_distance_to(rf, (0.0, 0.0, 0.0)) == pytest.approx(10.0)
    assert rf_distance_to(rf, (10.0, 0.0, 0.2)) == rf.reference_distance_m


def test_path_loss_conventions():
    printed = RfChannelSpec(distance_m=15.0)
    base10 = RfChannelSpec(distance_m=15.0, db_convention="base10")
    assert base10.db_convention is DbConvention.BASE10
    assert rf_path_loss(printed) == pytest.approx(40.0 + 18.0 * math.log(15.0))
    assert rf_path_loss(base10) == pytest.approx(40.0 + 18.0 * math.log10(15.0))
    assert linear_path_gain(printed) == pytest.approx(math.exp(-rf_path_loss(printed) / 10.0))
    assert linear_path_gain(base10) == pytest.approx(10.0 ** (-rf_path_loss(base10) / 10.0))


def test_shadowing_drawn_once_is_reproducible():
    rf = RfChannelSpec(shadowing_mode=ShadowingMode.DRAWN_ONCE, shadowing_seed=3)
    assert shadowing_draw(rf) == shadowing_draw(rf)
    assert shadowing_draw(RfChannelSpec()) == 0.0


def test_sampler_mean_power_matches_path_gain():
    rf = RfChannelSpec()
    sampler = FadingSampler.from_channel(rf)
    assert sampler.mean_power == pytest.approx(linear_path_gain(rf), rel=1e-12)
    assert not sampler.deterministic


def test_infinite_rician_factor_is_line_of_sight():
    rf = RfChannelSpec(rician_factor_db="inf")
    sampler = FadingSampler.from_channel(rf)
    assert sampler.deterministic
    draws = sample_fading_power(sampler, 10)
    assert np.allclose(draws, linear_path_gain(rf))
    assert sampler.cdf(linear_path_gain(rf)) == 1.0


def test_fading_draws_match_mean_and_law():
    sampler = FadingSampler.from_channel(RfChannelSpec(), seed=11)
    draws = sample_fading_power(sampler, 200_000)
    assert abs(draws.mean() / sampler.mean_power - 1.0) < 0.02
    median = float(np.median(draws))
    assert abs(sampler.cdf(median) - 0.5) < 0.01
    assert sampler.cdf(median) + sampler.sf(median) == pytest.approx(1.0)


def test_fading_draws_are_reproducible_from_seed():
    sampler = FadingSampler.from_channel(RfChannelSpec(), seed=5)
    assert np.array_equal(sample_fading_power(sampler, 100), sample_fading_power(sampler, 100))
    other = FadingSampler.from_channel(RfChannelSpec(), seed=6)
    assert not np.array_equal(sample_fading_power(sampler, 100), sample_fading_power(other, 100))


@pytest.mark.parametrize("rician_factor_db", [0.0, 10.0])
def test_million_draws_match_path_gain(rician_factor_db):
    rf = RfChannelSpec(rician_factor_db=rician_factor_db)
    draws = sample_fading_power(FadingSampler.from_channel(rf, seed=2), 1_000_000)
    assert np.all(draws >= 0.0)
    assert abs(draws.mean() / linear_path_gain(rf) - 1.0) < 0.01

import math

import numpy as np
import pytest
from scipy import integrate

from hybridqos.errors import OutOfRegimeError
from hybridqos.geometry_channel import RfChannelSpec, VlcChannelSpec, noise_powers, vlc_gain
from hybridqos.qos_engine import hybrid1_threshold
from hybridqos.rate_bounds import (FrameSpec, PowerBudget, RfRateModel, VlcRegime, dbm_to_watts,
                                   solve_ab, solve_mu_star, vlc_rate, watts_to_dbm)
from hybridqos.selftest import ab_residuals, mu_residual


def test_dbm_conversion():
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert watts_to_dbm(1.0) == pytest.approx(30.0)
    assert dbm_to_watts(20.0) == pytest.approx(0.1)


@pytest.mark.parametrize("ratio", [0.05, 0.2, 0.45, 0.5, 0.55, 0.8, 0.95])
def test_solve_ab_residuals(ratio):
    p_avg = 0.5
    constants = solve_ab(p_avg, p_avg / ratio)
    assert abs(constants.residual_a) < 1e-9
    assert abs(constants.residual_b) < 1e-9
    if constants.b != 0.0:
        first, second = ab_residuals(p_avg, p_avg / ratio, constants.a, constants.b)
        assert abs(first) < 1e-9
        assert abs(second) < 1e-9


def _grid_ab(p_avg, p_peak, b_grid):
    """(a, b) by scanning b for the truncated density a·e^{-bp/2} on [0, P_peak]"""
    p = np.linspace(0.0, p_peak, 1001)
    weights = np.exp(-0.5 * np.outer(b_grid, p))
    mass = integrate.trapezoid(weights, p, axis=1)
    mean = integrate.trapezoid(weights * p, p, axis=1) / mass
    best = int(np.argmin(np.abs(mean - p_avg)))
    return 2.0 / mass[best], b_grid[best]


@pytest.mark.parametrize("p_avg, b_grid, tolerance", [
    (0.5, np.linspace(-1e-3, 1e-3, 2001), 1e-6),
    (0.3, np.linspace(4.0, 7.0, 3001), 2e-3),
])
def test_solve_ab_matches_grid_scan(p_avg, b_grid, tolerance):
    constants = solve_ab(p_avg, 1.0)
    a, b = _grid_ab(p_avg, 1.0, b_grid)
    assert abs(constants.b - b) <= tolerance
    assert constants.a == pytest.approx(a, rel=10 * tolerance)


def test_solve_ab_sign_of_b_follows_ratio():
    assert solve_ab(0.3, 1.0).b > 0
    assert solve_ab(0.7, 1.0).b < 0


def test_solve_ab_unit_ratio_uses_bracket_edge():
    constants = solve_ab(1.0, 1.0)
    assert constants.b < 0
    assert abs(constants.residual_b) < 1e-9


def test_perturbed_b_is_caught_by_raw_residuals():
    constants = solve_ab(0.3, 1.0)
    _, second = ab_residuals(0.3, 1.0, constants.a, constants.b * 1.01)
    assert abs(second) > 1e-6


def test_solve_ab_rejects_average_above_peak():
    with pytest.raises(ValueError):
        solve_ab(2.0, 1.0)


def test_rf_rate_threshold_inverts_rate():
    frame = FrameSpec()
    sigma_r2, _ = noise_powers(RfChannelSpec(), VlcChannelSpec())
    model = RfRateModel.build(1.0, 1.0 / 0.7, sigma_r2, frame)
    for bits in (10.0, 1e3, 2e4):
        assert model.rate(model.threshold(bits)) == pytest.approx(bits, rel=1e-9)
    assert model.threshold(0.0) == 0.0


def test_threshold_with_single_symbol_frames():
    frame = FrameSpec(rf_bandwidth_hz=1e4)
    assert frame.symbols_per_frame_rf == 1.0
    model = RfRateModel.build(1.0, 4.0, 3.866e-14, frame)
    for bits in (20.0, 43.0, 44.0, 144.0):
        assert model.rate(model.threshold(bits)) == pytest.approx(bits, rel=1e-9)
    assert hybrid1_threshold(2263.0, model) == math.inf


def test_rf_rate_is_increasing_and_zero_at_zero():
    sigma_r2, _ = noise_powers(RfChannelSpec(), VlcChannelSpec())
    model = RfRateModel.build(1.0, 2.0, sigma_r2, FrameSpec())
    h2 = np.geomspace(1e-12, 1e-2, 50)
    rates = model.rate(h2)
    assert np.all(np.diff(rates) > 0)
    assert model.rate(0.0) == 0.0


@pytest.mark.parametrize("ratio", [1e-3, 0.01, 0.2, 0.4999])
def test_mu_star_residual(ratio):
    assert abs(mu_residual(solve_mu_star(ratio), ratio)) < 1e-9


def test_mu_star_matches_grid_scan():
    mu = np.arange(99_900_000, 100_000_001) * 1e-7
    ratio = 1.0 / mu - np.exp(-mu) / -np.expm1(-mu)
    assert abs(solve_mu_star(0.1) - mu[np.argmin(np.abs(ratio - 0.1))]) < 1e-6


def test_mu_star_vanishes_near_half():
    assert 0.0 < solve_mu_star(0.499) < 0.05


@pytest.mark.parametrize("ratio", [0.5, 0.7, 0.0])
def test_mu_star_outside_low_ratio_regime(ratio):
    with pytest.raises(OutOfRegimeError):
        solve_mu_star(ratio)


def _vlc(ratio, p_avg=1.0):
    vlc = VlcChannelSpec()
    _, sigma_v2 = noise_powers(RfChannelSpec(), vlc)
    return vlc_rate(vlc_gain(vlc), vlc.responsivity_a_per_w, sigma_v2, FrameSpec(), p_avg,
                    p_avg / ratio)


def test_vlc_rate_regimes():
    low, high = _vlc(0.3), _vlc(0.7)
    assert low.regime is VlcRegime.LOW_RATIO and low.mu_star > 0
    assert high.regime is VlcRegime.HIGH_RATIO and high.mu_star is None
    assert low.bits_per_frame > 0 and high.bits_per_frame > 0


def test_vlc_rate_continuous_at_half():
    at_half = _vlc(0.5).bits_per_frame
    assert abs(_vlc(0.5 - 1e-4).bits_per_frame - at_half) / at_half < 1e-3


def test_vlc_rate_grows_with_power():
    rates = [_vlc(0.7, p).bits_per_frame for p in (0.1, 0.3, 1.0, 3.0)]
    assert rates == sorted(rates)


def test_vlc_rate_is_zero_without_gain():
    vlc = VlcChannelSpec()
    _, sigma_v2 = noise_powers(RfChannelSpec(), vlc)
    assert vlc_rate(0.0, vlc.responsivity_a_per_w, sigma_v2, FrameSpec(), 1.0, 2.0).bits_per_frame == 0.0


def test_power_budget_and_frame():
    budget = PowerBudget.from_dbm(30.0, 0.5)
    assert budget.peak_power_w == pytest.approx(2.0)
    assert budget.split(0.25) == pytest.approx((0.25, 0.75))
    with pytest.raises(ValueError):
        PowerBudget(1.0, 1.5)
    frame = FrameSpec()
    assert frame.symbols_per_frame_rf == pytest.approx(1000.0)
    assert frame.to_kbps(1000.0) == pytest.approx(1e4)
    assert frame.to_ms(15.0) == pytest.approx(1.5)
    assert math.isclose(FrameSpec(time_share=0.5).symbols_per_frame_vlc, 500.0)


def test_noise_powers_at_default_temperature_and_bandwidth():
    sigma_r2, sigma_v2 = noise_powers(RfChannelSpec(), VlcChannelSpec())
    assert sigma_r2 == pytest.approx(3.866e-14, rel=1e-3)
    assert sigma_v2 == pytest.approx(1e-14, rel=1e-12)

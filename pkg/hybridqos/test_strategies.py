import math

import numpy as np
import pytest

from hybridqos.geometry_channel import RfChannelSpec, VlcChannelSpec, sample_fading_power
from hybridqos.qos_engine import GAMMA_EDGE, LinkModel, hybrid2_split
from hybridqos.rate_bounds import FrameSpec, PowerBudget
from hybridqos.source import SourceSpec
from hybridqos.strategies import (HandoverService, Hybrid1Service, Hybrid2Mode, Hybrid2Service,
                                  RfService, Strategy, VlcService, build_service)

SOURCE = SourceSpec(0.3, 0.7)


@pytest.fixture(scope="module")
def link():
    return LinkModel(RfChannelSpec(), VlcChannelSpec(), PowerBudget.from_dbm(30.0, 0.7), FrameSpec())


@pytest.fixture(scope="module")
def hybrid2(link):
    return Hybrid2Service(link)


def _narrow_rf_link(rf_bandwidth_hz):
    """RF frames of a few symbols, so R_l never reaches V"""
    return LinkModel(RfChannelSpec(), VlcChannelSpec(), PowerBudget.from_dbm(30.0, 0.7),
                     FrameSpec(rf_bandwidth_hz=rf_bandwidth_hz))


@pytest.mark.parametrize("strategy,cls", [
    ("rf", RfService), ("vlc", VlcService), ("hybrid1", Hybrid1Service),
    (Strategy.HANDOVER, HandoverService),
])
def test_build_service(link, strategy, cls):
    service = build_service(strategy, link, handover_n=4)
    assert isinstance(service, cls)
    assert service.name == Strategy(strategy).value


def test_build_service_rejects_unknown_strategy(link):
    with pytest.raises(ValueError):
        build_service("carrier-pigeon", link)


def test_lmgf_is_zero_at_origin_and_cached(link):
    service = RfService(link)
    assert service.lmgf(0.0) == 0.0
    first = service.lmgf(-0.01)
    assert service.lmgf(-0.01) == first
    assert -0.01 in service._cache


def test_vlc_effective_capacity_is_its_rate(link):
    service = VlcService(link)
    assert service.deterministic_rate == link.vlc_bits_per_frame
    assert service.effective_capacity(0.05) == pytest.approx(link.vlc_bits_per_frame)
    assert service.rho(SOURCE, 0.01).auxiliary["regime"] == "high-ratio"


def test_rf_lmgf_is_convex(link):
    service = RfService(link)
    assert service.is_convex_at(-0.01)
    assert service.is_convex_at(0.001)


@pytest.mark.parametrize("theta", [1e-3, 1e-2])
def test_hybrid1_dominates_single_links(link, theta):
    hybrid = Hybrid1Service(link).rho(SOURCE, theta).rho_bits_per_frame
    rf = RfService(link).rho(SOURCE, theta).rho_bits_per_frame
    vlc = VlcService(link).rho(SOURCE, theta).rho_bits_per_frame
    assert hybrid >= max(rf, vlc) * (1.0 - 1e-9)


def test_hybrid1_per_frame_service_is_the_better_link(link):
    service = Hybrid1Service(link)
    h2 = sample_fading_power(link.sampler, 10_000, np.random.default_rng(1))
    served = service.frame_service(h2)
    best = np.maximum(link.rf_model.rate(h2), link.vlc_bits_per_frame)
    assert np.allclose(served, best)
    assert 0.0 <= service.delta <= 1.0


def test_rho_result_carries_balance_residual(link):
    result = Hybrid1Service(link).rho(SOURCE, 0.01)
    assert abs(result.auxiliary["balance_residual"]) < 1e-8
    assert result.rho_bits_per_frame <= result.mean_service_bits_per_frame
    assert "hybrid1" in str(result)


def test_rho_decreases_with_theta(link):
    service = Hybrid1Service(link)
    rhos = [service.rho(SOURCE, t).rho_bits_per_frame for t in (1e-4, 1e-3, 1e-2, 1e-1)]
    assert all(b <= a * (1.0 + 1e-9) for a, b in zip(rhos, rhos[1:]))


def test_hybrid2_profile_matches_direct_split(link, hybrid2):
    h2 = sample_fading_power(link.sampler, 5, np.random.default_rng(3))
    for value in h2:
        exact = hybrid2_split(float(value), link)[1]
        assert hybrid2.frame_service(value) == pytest.approx(exact, rel=1e-2)


def test_hybrid2_gamma_profile_is_a_fraction(link, hybrid2):
    gammas = hybrid2.profile.gamma(np.geomspace(1e-12, 1e-3, 20))
    assert np.all((gammas >= 0.0) & (gammas <= 1.0))
    assert 0.0 <= hybrid2.auxiliary(0.01)["gamma_mean"] <= 1.0


def test_hybrid2_fixed_mode_adds_constant_vlc_part(link):
    service = Hybrid2Service(link, Hybrid2Mode.FIXED, gamma=0.5)
    rf_only = link.expectation.log_mgf(-0.01, service.rf_model.rate)
    assert service.lmgf(-0.01) == pytest.approx(-0.01 * service.v_bits + rf_only)
    with pytest.raises(ValueError):
        Hybrid2Service(link, Hybrid2Mode.FIXED, gamma=0.0)


def test_handover_costs_capacity(link):
    hybrid1 = Hybrid1Service(link).mean_rate()
    means = [HandoverService(link, n).mean_rate() for n in (2, 4, 16)]
    assert means == sorted(means)
    assert means[-1] < hybrid1 * (1.0 + 1e-9)


def test_handover_frame_lmgf_is_n_sub_frames(link):
    service = HandoverService(link, 4)
    assert service.lmgf(-0.01) == pytest.approx(4 * service.sub_frame_lmgf(-0.01))
    assert 0.0 <= service.switch_probability() <= 1.0
    assert service.auxiliary(0.01)["n"] == 4


def test_handover_theta_star_balances_the_source(link):
    service = HandoverService(link, 4)
    source = SourceSpec(0.3, 0.7, 0.5 * service.mean_rate() / 0.7)
    theta_star = service.theta_star(source)
    assert theta_star > 0
    assert service.rho(source, theta_star).rho_bits_per_frame == pytest.approx(source.mean_rate, rel=1e-6)


@pytest.mark.parametrize("rf_bandwidth_hz", [1e5, 1e4])
def test_hybrid1_with_unreachable_threshold_is_vlc(rf_bandwidth_hz):
    link = _narrow_rf_link(rf_bandwidth_hz)
    service = Hybrid1Service(link)
    assert service.delta == 0.0
    for theta in (-0.01, 0.001):
        assert service.lmgf(theta) == pytest.approx(theta * link.vlc_bits_per_frame, rel=1e-12)
    assert service.mean_rate() == pytest.approx(link.vlc_bits_per_frame)
    if rf_bandwidth_hz == 1e4:
        assert service.kappa == math.inf


def test_handover_without_rf_serves_vlc_every_sub_frame():
    link = _narrow_rf_link(1e4)
    service = HandoverService(link, 4)
    assert service.delta == 0.0
    assert service.lmgf(-0.01) == pytest.approx(-0.01 * link.vlc_bits_per_frame, rel=1e-8)
    assert service.mean_rate() == pytest.approx(link.vlc_bits_per_frame, rel=1e-9)
    assert service.switch_probability() == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("build", [RfService, Hybrid1Service, lambda link: HandoverService(link, 4)])
def test_rho_approaches_mean_service_as_theta_vanishes(link, build):
    service = build(link)
    rho = service.rho(SOURCE, 1e-6).rho_bits_per_frame
    assert rho == pytest.approx(service.mean_rate(), rel=0.02)
    assert rho <= service.mean_rate() * (1.0 + 1e-9)


@pytest.mark.slow
def test_hybrid2_split_matches_grid_search(link):
    h2 = sample_fading_power(link.sampler, 100, np.random.default_rng(7))
    gammas = np.linspace(GAMMA_EDGE, 1.0 - GAMMA_EDGE, 10_001)
    grid = np.empty((gammas.size, h2.size))
    for i, gamma in enumerate(gammas):
        p_avg_r, p_avg_v = link.budget.split(gamma)
        grid[i] = link.rf_model_at(p_avg_r).rate(h2) + link.vlc_rate_at(p_avg_v).bits_per_frame
    best = grid.max(axis=0)
    for value, grid_best in zip(h2, best):
        total = hybrid2_split(float(value), link)[1]
        assert total >= grid_best - 1e-3
        assert total == pytest.approx(grid_best, rel=1e-3)

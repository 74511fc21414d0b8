import math

import numpy as np
import pytest

from hybridqos.errors import NoPositiveRootError
from hybridqos.geometry_channel import RfChannelSpec, VlcChannelSpec
from hybridqos.qos_engine import (GAMMA_EDGE, HandoverChainSpec, Link, LinkModel, check_theta,
                                  hybrid1_threshold, hybrid2_breakpoint, hybrid2_split,
                                  hybrid2_sum_rate, lmgf_handover, lmgf_handover_renewal, lmgf_rf,
                                  max_avg_arrival_rate, multi_link_select, rate_balance_residual,
                                  select_link, solve_theta_star)
from hybridqos.rate_bounds import FrameSpec, PowerBudget
from hybridqos.source import SourceSpec


@pytest.fixture(scope="module")
def link():
    return LinkModel(RfChannelSpec(), VlcChannelSpec(), PowerBudget.from_dbm(30.0, 0.7), FrameSpec())


def test_link_model_derives_rates(link):
    assert link.vlc_bits_per_frame > 0
    assert link.gain > 0
    assert link.rf_model.p_avg_r == pytest.approx(1.0)
    assert link.sampler.mean_power > 0


def test_theta_must_be_positive():
    with pytest.raises(ValueError):
        check_theta(0.0)
    with pytest.raises(ValueError):
        check_theta(-1.0)


def test_rho_of_always_on_source_is_effective_capacity():
    source = SourceSpec(0.0, 1.0)
    assert max_avg_arrival_rate(-20.0, source, 0.01) == pytest.approx(2000.0)


def test_rho_of_iid_source_matches_closed_form():
    source = SourceSpec(0.4, 0.6)
    theta, v_bits = 0.01, 2000.0
    u = theta * v_bits
    expected = 0.6 / theta * (u + math.log(1.0 - 0.4 * math.exp(-u)) - math.log(0.6))
    assert max_avg_arrival_rate(-u, source, theta) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("alpha,beta", [(0.3, 0.7), (0.05, 0.2), (0.9, 0.1)])
def test_rho_balances_source_and_service(alpha, beta):
    source = SourceSpec(alpha, beta)
    for theta in (1e-3, 1e-2, 1e-1):
        service_neg = -theta * 1500.0
        rho = max_avg_arrival_rate(service_neg, source, theta)
        assert 0.0 < rho <= 1500.0 * (1.0 + 1e-12)
        assert abs(rate_balance_residual(rho, source, service_neg, theta)) < 1e-9 * theta * 1500.0


def test_rho_decreases_with_theta():
    source = SourceSpec(0.3, 0.7)
    rhos = [max_avg_arrival_rate(-t * 1000.0, source, t) for t in (1e-4, 1e-3, 1e-2, 1e-1)]
    assert rhos == sorted(rhos, reverse=True)


def test_selection_threshold_separates_decisions(link):
    source = SourceSpec(0.3, 0.7)
    theta = 0.01
    rf_neg = lmgf_rf(-theta, link)
    certificate = select_link(link.vlc_bits_per_frame, rf_neg, source, theta)
    threshold = certificate.threshold_bits
    assert select_link(threshold * 1.001, rf_neg, source, theta).decision is Link.VLC
    assert select_link(threshold * 0.999, rf_neg, source, theta).decision is Link.RF
    assert certificate.o2 > 0


def test_selection_agrees_with_rho_comparison(link):
    source = SourceSpec(0.3, 0.7)
    theta = 0.01
    rf_neg = lmgf_rf(-theta, link)
    rho_rf = max_avg_arrival_rate(rf_neg, source, theta)
    for v_bits in np.geomspace(10.0, 1e5, 13):
        rho_vlc = max_avg_arrival_rate(-theta * v_bits, source, theta)
        if abs(rho_vlc - rho_rf) < 1e-6 * rho_rf:
            continue
        expected = Link.VLC if rho_vlc > rho_rf else Link.RF
        assert select_link(v_bits, rf_neg, source, theta).decision is expected


def test_multi_link_select():
    assert multi_link_select([1.0, 3.0, 3.0]) == 1
    assert multi_link_select([5.0, 1.0]) == 0
    with pytest.raises(ValueError):
        multi_link_select([1.0])


def test_hybrid1_threshold_inverts_rf_rate(link):
    kappa = hybrid1_threshold(link.vlc_bits_per_frame, link.rf_model)
    assert link.rf_model.rate(kappa) == pytest.approx(link.vlc_bits_per_frame, rel=1e-9)
    assert hybrid1_threshold(0.0, link.rf_model) == 0.0


def test_hybrid2_breakpoint():
    assert hybrid2_breakpoint(PowerBudget(1.0, 0.7)) == pytest.approx(1.0 - 0.5 / 0.7)
    assert hybrid2_breakpoint(PowerBudget(1.0, 0.4)) is None


def test_hybrid2_split_beats_the_edges(link):
    h2 = link.sampler.mean_power
    gamma, total = hybrid2_split(h2, link)
    assert 0.0 < gamma < 1.0
    assert total >= hybrid2_sum_rate(GAMMA_EDGE, h2, link)
    assert total >= hybrid2_sum_rate(1.0 - GAMMA_EDGE, h2, link)
    assert total == pytest.approx(hybrid2_sum_rate(gamma, h2, link))


def test_handover_chain_structure():
    chain = HandoverChainSpec(4, 0.3)
    gamma = chain.transition_matrix()
    assert gamma.shape == (10, 10)
    assert np.allclose(gamma.sum(axis=0), 1.0)
    stationary = chain.stationary_distribution()
    assert stationary.sum() == pytest.approx(1.0)
    assert np.all(stationary > -1e-12)
    assert np.allclose(gamma @ stationary, stationary)
    assert chain.sub_frame_duration_s == pytest.approx(2.5e-5)


@pytest.mark.parametrize("n", [1, 2.5])
def test_handover_chain_rejects_bad_n(n):
    with pytest.raises(ValueError):
        HandoverChainSpec(n, 0.3)


@pytest.mark.parametrize("n,delta,log_v,log_r", [
    (4, 0.3, -2.0, -3.0),
    (4, 0.3, 1.5, 2.0),
    (8, 0.05, -20.0, -25.0),
    (16, 0.7, -5.0, -4.0),
])
def test_power_iteration_matches_renewal(n, delta, log_v, log_r):
    chain = HandoverChainSpec(n, delta)
    assert abs(lmgf_handover(chain, log_v, log_r) - lmgf_handover_renewal(chain, log_v, log_r)) < 1e-8


def test_handover_without_rf_is_vlc_only():
    chain = HandoverChainSpec(4, 0.0)
    assert lmgf_handover_renewal(chain, -2.0, -7.0) == pytest.approx(-0.5)
    assert lmgf_handover(chain, -2.0, -7.0) == pytest.approx(-0.5, abs=1e-8)


def test_theta_star_needs_traffic():
    chain = HandoverChainSpec(4, 0.3)
    with pytest.raises(NoPositiveRootError):
        solve_theta_star(SourceSpec(0.3, 0.7, 0.0), chain, lambda t: 0.0, 100.0)
    with pytest.raises(NoPositiveRootError):
        solve_theta_star(SourceSpec(0.3, 0.7, 1000.0), chain, lambda t: 0.0, 100.0)


@pytest.mark.parametrize("alpha,beta", [(0.3, 0.7), (0.0, 1.0)])
def test_rho_tends_to_the_service_rate_for_small_theta(alpha, beta):
    source = SourceSpec(alpha, beta)
    theta = 1e-7
    assert max_avg_arrival_rate(-theta * 1500.0, source, theta) == pytest.approx(1500.0, rel=0.02)


def test_threshold_beyond_float_range_is_infinite():
    narrow = LinkModel(RfChannelSpec(), VlcChannelSpec(), PowerBudget.from_dbm(30.0, 0.7),
                       FrameSpec(rf_bandwidth_hz=1e4))
    assert hybrid1_threshold(narrow.vlc_bits_per_frame, narrow.rf_model) == math.inf
    assert lmgf_handover(HandoverChainSpec(4, 0.0), -0.01 * narrow.vlc_bits_per_frame, 0.0) == \
        pytest.approx(-0.0025 * narrow.vlc_bits_per_frame, rel=1e-8)

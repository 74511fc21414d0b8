import numpy as np
import pytest

from hybridqos.calculus_bounds import (BoundQuery, backlog_arrival_term, backlog_bound,
                                       backlog_service_term, delay_bound, theta_grid)
from hybridqos.errors import AllInfeasibleError, EmptyDomainError
from hybridqos.geometry_channel import RfChannelSpec, VlcChannelSpec
from hybridqos.qos_engine import LinkModel
from hybridqos.rate_bounds import FrameSpec, PowerBudget
from hybridqos.source import SourceSpec
from hybridqos.strategies import Hybrid1Service, Hybrid2Mode, Hybrid2Service, RfService, VlcService

QUICK = BoundQuery(epsilon=1e-3, theta_points=100, c_points=16)


@pytest.fixture(scope="module")
def link():
    return LinkModel(RfChannelSpec(distance_m=10.0), VlcChannelSpec(),
                     PowerBudget.from_dbm(30.0, 0.7), FrameSpec())


def test_query_validation_and_split():
    query = BoundQuery(epsilon=1e-2, service_share=0.3)
    assert query.epsilon_service == pytest.approx(3e-3)
    assert query.epsilon_arrival == pytest.approx(7e-3)
    assert query.with_share(0.5).epsilon_service == pytest.approx(5e-3)
    for bad in ({"epsilon": 0.0}, {"epsilon": 1.0}, {"service_share": 1.0}, {"theta_points": 1}):
        with pytest.raises(ValueError):
            BoundQuery(**bad)


def test_theta_grid_is_relative_to_mean_service():
    grid = theta_grid(1000.0, 5, (1e-3, 1e1))
    assert grid[0] == pytest.approx(1e-6)
    assert grid[-1] == pytest.approx(1e-2)
    assert np.allclose(grid[1:] / grid[:-1], grid[1] / grid[0])


def test_silent_source_needs_no_buffer():
    thetas = theta_grid(1000.0)
    assert backlog_arrival_term(SourceSpec(0.3, 0.7, 0.0), 1e-3, 500.0, thetas) == (0.0, None)


def test_constant_rate_service_term(link):
    service = VlcService(link)
    v_bits = link.vlc_bits_per_frame
    thetas = theta_grid(v_bits)
    assert backlog_service_term(service, 1e-3, 0.9 * v_bits, thetas) == (0.0, None)
    with pytest.raises(EmptyDomainError):
        backlog_service_term(service, 1e-3, 1.1 * v_bits, thetas)


def test_service_term_skips_theta_outside_its_domain(link):
    service = RfService(link)
    c = 0.01 * service.mean_rate()
    thetas = theta_grid(service.mean_rate(), 200)
    arguments = np.array([-0.5 * (service.lmgf(-t) + t * c) for t in thetas])
    inside = (arguments > 0.0) & (arguments <= 1.0)
    assert inside.any() and (arguments > 1.0).any()
    q, theta = backlog_service_term(service, 0.5, c, thetas)
    assert q == pytest.approx(-np.max(np.log(arguments[inside]) / thetas[inside]), rel=1e-12)
    assert 0.0 < -0.5 * (service.lmgf(-theta) + theta * c) <= 1.0


def test_vlc_bound_uses_its_rate_as_capacity(link):
    source = SourceSpec(0.3, 0.7, 0.5 * link.vlc_bits_per_frame)
    result = backlog_bound(VlcService(link), source, QUICK)
    assert result.c_bits_per_frame == pytest.approx(link.vlc_bits_per_frame)
    assert result.q_service_bits == 0.0
    assert result.q_bits == pytest.approx(result.q_arrival_bits)
    assert result.d_frames == pytest.approx(result.q_bits / link.vlc_bits_per_frame)
    assert result.d_ms(1e-4) == pytest.approx(result.d_frames * 0.1)


def test_overloaded_constant_service_is_infeasible(link):
    source = SourceSpec(0.3, 0.7, 2.0 * link.vlc_bits_per_frame / 0.7)
    with pytest.raises(AllInfeasibleError):
        backlog_bound(VlcService(link), source, QUICK)


def test_vlc_delay_grows_with_load(link):
    service = VlcService(link)
    v_bits = link.vlc_bits_per_frame
    delays = [delay_bound(service, SourceSpec(0.3, 0.7, f * v_bits), QUICK).d_frames
              for f in (0.1, 0.3, 0.6)]
    assert all(b >= a * (1.0 - 1e-6) for a, b in zip(delays, delays[1:]))


def test_hybrid1_bounds_are_consistent(link):
    service = Hybrid1Service(link)
    source = SourceSpec(0.3, 0.7, 0.3 * service.mean_rate())
    backlog = backlog_bound(service, source, QUICK)
    delay = delay_bound(service, source, QUICK)
    assert backlog.q_bits >= 0.0
    assert backlog.q_bits == pytest.approx(backlog.q_service_bits + backlog.q_arrival_bits)
    assert delay.d_frames == pytest.approx(delay.q_bits / delay.c_bits_per_frame)
    assert backlog.epsilon_service + backlog.epsilon_arrival == pytest.approx(1e-3)


def test_rf_bound_loosens_for_tighter_epsilon(link):
    service = RfService(link)
    source = SourceSpec(0.3, 0.7, 0.3 * service.mean_rate())
    loose = backlog_bound(service, source, BoundQuery(1e-2, theta_points=100, c_points=16))
    tight = backlog_bound(service, source, BoundQuery(1e-6, theta_points=100, c_points=16))
    assert tight.q_bits > loose.q_bits


def test_optimised_split_is_never_worse(link):
    service = Hybrid1Service(link)
    source = SourceSpec(0.3, 0.7, 0.3 * service.mean_rate())
    default = delay_bound(service, source, QUICK)
    optimised = delay_bound(service, source, BoundQuery(1e-3, theta_points=100, c_points=16,
                                                        optimize_split=True))
    assert optimised.d_frames <= default.d_frames * (1.0 + 1e-12)
    assert any("split" in note for note in optimised.notes)


def test_hybrid2_has_no_bound(link):
    service = Hybrid2Service(link, Hybrid2Mode.FIXED, gamma=0.5)
    with pytest.raises(ValueError):
        backlog_bound(service, SourceSpec(0.3, 0.7, 100.0), QUICK)

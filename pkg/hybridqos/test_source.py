import math

import numpy as np
import pytest

from hybridqos.source import (OnOffGenerator, SourceSpec, generate_arrivals, lmgf_arrival_asymptotic,
                              lmgf_arrival_finite, lmgf_arrival_finite_sequence, log_perron_root,
                              sup_lmgf_arrival_finite)


def test_steady_state_and_mean_rate():
    spec = SourceSpec(0.3, 0.7, 1000.0)
    assert spec.p_on == pytest.approx(0.7)
    assert spec.p_off == pytest.approx(0.3)
    assert spec.mean_rate == pytest.approx(700.0)
    assert spec.with_rate(10.0).mean_rate == pytest.approx(7.0)


@pytest.mark.parametrize("alpha,beta,rate", [(-0.1, 0.5, 1.0), (0.0, 0.0, 1.0), (0.5, 0.5, -1.0)])
def test_invalid_source(alpha, beta, rate):
    with pytest.raises(ValueError):
        SourceSpec(alpha, beta, rate)


def test_always_on_source_is_deterministic():
    spec = SourceSpec(0.0, 1.0, 250.0)
    for theta in (-0.01, 0.001, 0.02):
        assert lmgf_arrival_asymptotic(spec, theta) == pytest.approx(theta * 250.0, rel=1e-12)


def test_iid_source_matches_bernoulli():
    spec = SourceSpec(0.4, 0.6, 100.0)
    for theta in (-0.05, 0.01, 0.5):
        bernoulli = math.log(0.6 * math.exp(theta * 100.0) + 0.4)
        assert lmgf_arrival_asymptotic(spec, theta) == pytest.approx(bernoulli, rel=1e-10)
        assert lmgf_arrival_finite(spec, theta, 7) == pytest.approx(bernoulli, rel=1e-10)


def test_asymptotic_lmgf_is_zero_at_origin_and_convex():
    spec = SourceSpec(0.1, 0.2, 500.0)
    assert lmgf_arrival_asymptotic(spec, 0.0) == pytest.approx(0.0, abs=1e-15)
    thetas = np.linspace(-0.01, 0.01, 41)
    values = lmgf_arrival_asymptotic(spec, thetas)
    assert np.all(np.diff(values) > 0)
    assert np.all(np.diff(values, 2) > -1e-12)
    slope = (values[21] - values[19]) / (thetas[21] - thetas[19])
    assert slope == pytest.approx(spec.mean_rate, rel=1e-3)


def test_perron_root_survives_large_arguments():
    assert np.isfinite(log_perron_root(0.3, 0.7, 800.0))
    assert np.isfinite(log_perron_root(0.3, 0.7, -800.0))
    assert log_perron_root(0.3, 0.7, 800.0) == pytest.approx(800.0 + math.log(0.7), abs=1e-6)


def test_finite_sequence_matches_direct_evaluation():
    spec = SourceSpec(0.1, 0.3, 200.0)
    sequence = lmgf_arrival_finite_sequence(spec, 0.004, 12)
    for t in range(1, 13):
        assert sequence[t - 1] == pytest.approx(lmgf_arrival_finite(spec, 0.004, t), rel=1e-10)


def test_finite_horizon_converges_to_asymptotic():
    spec = SourceSpec(0.05, 0.1, 300.0)
    theta = 0.002
    gaps = [abs(lmgf_arrival_finite(spec, theta, t) - lmgf_arrival_asymptotic(spec, theta))
            for t in (10, 100, 1000)]
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] < 1e-2 * lmgf_arrival_asymptotic(spec, theta)


def test_supremum_dominates_every_horizon():
    spec = SourceSpec(0.05, 0.1, 300.0)
    best = sup_lmgf_arrival_finite(spec, 0.002, t_max=50)
    assert all(best >= lmgf_arrival_finite(spec, 0.002, t) - 1e-12 for t in (1, 10, 50))
    assert best <= 0.002 * spec.lambda_bits_per_frame
    vector = sup_lmgf_arrival_finite(spec, np.array([0.001, 0.002]), t_max=50)
    assert vector.shape == (2,)


def test_finite_horizon_rejects_zero():
    with pytest.raises(ValueError):
        lmgf_arrival_finite(SourceSpec(0.3, 0.7, 1.0), 0.1, 0)


def test_generated_trace_has_stationary_statistics():
    spec = SourceSpec(0.2, 0.1, 50.0)
    trace = generate_arrivals(spec, 300_000, seed=4)
    assert abs(trace.on_fraction - spec.p_on) < 0.02
    states = trace.state_sequence
    leaving_on = np.mean(~states[1:][states[:-1]])
    assert abs(leaving_on - spec.alpha) < 0.01
    assert set(np.unique(trace.per_frame_arrivals)) <= {0.0, 50.0}


def test_generated_trace_is_reproducible():
    spec = SourceSpec(0.3, 0.7, 10.0)
    first = generate_arrivals(spec, 5000, seed=9)
    second = generate_arrivals(spec, 5000, seed=9)
    assert np.array_equal(first.state_sequence, second.state_sequence)


def test_generator_continues_across_calls():
    spec = SourceSpec(0.01, 0.02, 1.0)
    generator = OnOffGenerator(spec, np.random.default_rng(2))
    states = np.concatenate([generator.states(777) for _ in range(200)])
    assert states.size == 155_400
    switches = np.count_nonzero(states[1:] != states[:-1])
    expected = (states.size - 1) * 2 * spec.alpha * spec.beta / (spec.alpha + spec.beta)
    assert abs(switches / expected - 1.0) < 0.15


def test_absorbing_states():
    always_on = OnOffGenerator(SourceSpec(0.0, 0.5, 1.0), np.random.default_rng(0))
    assert always_on.states(1000).all()
    always_off = generate_arrivals(SourceSpec(1.0, 0.0, 1.0), 100, seed=0)
    assert not always_off.state_sequence.any()

"""
Steady-state QoS analysis

Maximum average arrival rates from service log-MGFs, VLC/RF link selection
with its quadratic-root certificate, the Hybrid-I threshold, the Hybrid-II
power split and the handover Markov chain.

A service log-MGF Λ(θ) is per frame; ρ(θ) is in bits per frame.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import NoPositiveRootError, UnstableError
from .expectation import ExpectationMethod, FadingExpectation
from .geometry_channel import (FadingSampler, RfChannelSpec, VlcChannelSpec, noise_powers,
                               vlc_gain)
from .numerics import bisect_root, log_spectral_radius, maximize_bounded
from .rate_bounds import (FrameSpec, PowerBudget, RfRateModel, VlcRateConstants, solve_ab,
                          vlc_rate)
from .source import SourceSpec, lmgf_arrival_asymptotic, log_perron_root

logger = logging.getLogger(__name__)

GAMMA_EDGE = 1e-6
GAMMA_TOL = 1e-6


def check_theta(theta: float) -> float:
    if not theta > 0:
        raise ValueError(f"QoS exponent theta must be positive, got {theta!r}")
    return float(theta)


@dataclass
class LinkModel:
    """Everything derived from the channel specs, the power budget and the frame

    Built once per scenario point and shared read-only by the strategies.
    """
    rf: RfChannelSpec
    vlc: VlcChannelSpec
    budget: PowerBudget
    frame: FrameSpec
    fading_seed: int = 0
    method: ExpectationMethod = ExpectationMethod.AUTO
    sampler: FadingSampler = field(init=False)
    expectation: FadingExpectation = field(init=False)
    sigma_r2: float = field(init=False)
    sigma_v2: float = field(init=False)
    gain: float = field(init=False)
    rf_model: RfRateModel = field(init=False)
    vlc_constants: VlcRateConstants = field(init=False)

    def __post_init__(self):
        self.sampler = FadingSampler.from_channel(self.rf, self.fading_seed)
        self.expectation = FadingExpectation(self.sampler, self.method)
        self.sigma_r2, self.sigma_v2 = noise_powers(self.rf, self.vlc)
        self.gain = vlc_gain(self.vlc)
        self.rf_model = self.rf_model_at(self.budget.avg_power_w)
        self.vlc_constants = self.vlc_rate_at(self.budget.avg_power_w)

    @property
    def vlc_bits_per_frame(self) -> float:
        return self.vlc_constants.bits_per_frame

    def rf_model_at(self, p_avg_r: float) -> RfRateModel:
        return RfRateModel(solve_ab(p_avg_r, self.budget.peak_power_w), self.frame,
                           p_avg_r, self.sigma_r2)

    def vlc_rate_at(self, p_avg_v: float) -> VlcRateConstants:
        return vlc_rate(self.gain, self.vlc.responsivity_a_per_w, self.sigma_v2, self.frame,
                        p_avg_v, self.budget.peak_power_w)


def lmgf_rf(theta: float, link: LinkModel) -> float:
    """Λ_r(θ) = log E_h[e^{θ R_l}]"""
    return link.expectation.log_mgf(theta, link.rf_model.rate)


def lmgf_vlc(theta: float, v_bits: float) -> float:
    return theta * v_bits


def _log_stability_argument(source: SourceSpec, service_neg: float, theta: float) -> float:
    """log of (1-(1-β)D)/((1-α)D-(1-α-β)D²) with D = e^{Λ(-θ)}, evaluated through u = -Λ(-θ)"""
    alpha, beta = source.alpha, source.beta
    u = max(0.0, -service_neg)
    decay = math.exp(-u)
    numerator = 1.0 - (1.0 - beta) * decay
    denominator = (1.0 - alpha) - (1.0 - alpha - beta) * decay
    if numerator <= 0.0 or denominator <= 0.0:
        raise UnstableError(theta, "log argument is not positive")
    return u + math.log(numerator) - math.log(denominator)


def max_avg_arrival_rate(service_neg: float, source: SourceSpec, theta: float) -> float:
    """ρ(θ) for a service whose log-MGF at -θ is service_neg

    The source's own lambda is ignored; ρ is the average rate p_ON·λ that
    balances Λ_a(θ) = -Λ(-θ).
    """
    theta = check_theta(theta)
    log_argument = _log_stability_argument(source, service_neg, theta)
    return source.beta / ((source.alpha + source.beta) * theta) * log_argument


def rate_balance_residual(rho: float, source: SourceSpec, service_neg: float, theta: float) -> float:
    """Λ_a(θ) + Λ(-θ) after back-substituting λ = ρ(α+β)/β into the source"""
    if source.beta == 0.0:
        return service_neg
    peak = rho * (source.alpha + source.beta) / source.beta
    return float(lmgf_arrival_asymptotic(source.with_rate(peak), theta)) + service_neg


class Link(Enum):
    VLC = "vlc"
    RF = "rf"


@dataclass(frozen=True)
class SelectionCertificate:
    """Outcome of the VLC/RF comparison with the quadratic roots behind it"""
    decision: Link
    theta: float
    v_bits: float
    log_xi: float
    log_o2: float
    o1: float

    @property
    def threshold_bits(self) -> float:
        """Smallest V for which VLC is selected, (1/θ) log O₂"""
        return self.log_o2 / self.theta

    @property
    def o2(self) -> float:
        return math.exp(self.log_o2)


def select_link(v_bits: float, rf_service_neg: float, source: SourceSpec,
                theta: float) -> SelectionCertificate:
    """VLC iff V >= (1/θ) log O₂, the larger root of O² - (1-β+(1-α)ξ)O + (1-α-β)ξ = 0"""
    theta = check_theta(theta)
    log_xi = _log_stability_argument(source, rf_service_neg, theta)
    # O₂ is the Perron root of diag(ξ, 1)·J, the arrival log-MGF with θλ replaced by log ξ
    log_o2 = float(log_perron_root(source.alpha, source.beta, log_xi))
    o1 = (1.0 - source.alpha - source.beta) * math.exp(log_xi - log_o2)
    decision = Link.VLC if theta * v_bits >= log_o2 else Link.RF
    return SelectionCertificate(decision, theta, v_bits, log_xi, log_o2, o1)


def multi_link_select(rhos: Sequence[float]) -> int:
    """Index of the largest ρ; ties go to the lowest index"""
    if len(rhos) < 2:
        raise ValueError("multi-link selection needs at least two candidates")
    return int(np.argmax(np.asarray(rhos, dtype=float)))


def hybrid1_threshold(v_bits: float, rate_model: RfRateModel) -> float:
    """κ with R_l(κ) = V: RF carries the frame iff |h|² > κ"""
    if v_bits < 0:
        raise ValueError("V must be nonnegative")
    return rate_model.threshold(v_bits)


def hybrid2_breakpoint(budget: PowerBudget) -> Optional[float]:
    """γ at which the VLC average-to-peak ratio (1-γ)ν crosses 1/2, if inside (0, 1)"""
    if budget.avg_to_peak_ratio <= 0.5:
        return None
    return 1.0 - 0.5 / budget.avg_to_peak_ratio


def hybrid2_sum_rate(gamma: float, h2: float, link: LinkModel) -> float:
    """R_l(γ) + V(γ) for one fading realisation"""
    p_avg_r, p_avg_v = link.budget.split(gamma)
    rf_bits = link.rf_model_at(p_avg_r).rate(h2) if p_avg_r > 0 else 0.0
    return float(rf_bits) + link.vlc_rate_at(p_avg_v).bits_per_frame


def hybrid2_split(h2: float, link: LinkModel) -> Tuple[float, float]:
    """(γ*, R_l(γ*) + V(γ*)) maximising the per-frame sum rate

    The VLC rate switches formula where (1-γ)ν = 1/2, so each side of that
    breakpoint is searched separately.
    """
    edges = [GAMMA_EDGE, 1.0 - GAMMA_EDGE]
    breakpoint = hybrid2_breakpoint(link.budget)
    if breakpoint is not None and edges[0] < breakpoint < edges[1]:
        edges.insert(1, breakpoint)
    best = (edges[0], -math.inf)
    for lo, hi in zip(edges[:-1], edges[1:]):
        candidate = maximize_bounded(lambda g: hybrid2_sum_rate(g, h2, link), lo, hi, GAMMA_TOL)
        if candidate[1] > best[1]:
            best = candidate
    return best


@dataclass(frozen=True)
class HandoverChainSpec:
    """Sub-frame Markov chain of a link that pays one idle sub-frame per switch

    States 1..n carry a VLC block, n+1 is the VLC->RF handover, n+2..2n+1 an RF
    block and 2n+2 the RF->VLC handover. delta = Pr{|h|² > κ}.
    """
    n: int
    delta: float
    frame_duration_s: float = 1e-4

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer greater than 1")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")

    @property
    def states(self) -> int:
        return 2 * self.n + 2

    @property
    def sub_frame_duration_s(self) -> float:
        return self.frame_duration_s / self.n

    @property
    def delta_r(self) -> float:
        return self.delta

    @property
    def delta_v(self) -> float:
        return 1.0 - self.delta

    def transition_matrix(self) -> np.ndarray:
        """Γ = [p_ji]: column i holds the probabilities of leaving state i"""
        n = self.n
        gamma = np.zeros((self.states, self.states))
        for state in list(range(1, n)) + list(range(n + 1, 2 * n + 1)):
            gamma[state, state - 1] = 1.0
        gamma[n, n - 1] = self.delta            # n -> n+1, switch to RF
        gamma[0, n - 1] = 1.0 - self.delta      # n -> 1, stay on VLC
        gamma[n + 1, 2 * n] = self.delta        # 2n+1 -> n+2, stay on RF
        gamma[2 * n + 1, 2 * n] = 1.0 - self.delta
        gamma[0, 2 * n + 1] = 1.0
        return gamma

    def mgf_diagonal(self, log_vlc_term: float, log_rf_term: float) -> np.ndarray:
        """log diag Φ(θ): e^{θV} at state n, E[e^{θR} | RF] at state 2n+1, 1 elsewhere"""
        diagonal = np.zeros(self.states)
        diagonal[self.n - 1] = log_vlc_term
        diagonal[2 * self.n] = log_rf_term
        return diagonal

    def balanced_diagonal(self, log_vlc_term: float, log_rf_term: float) -> np.ndarray:
        """Block weights spread evenly over their n sub-frames

        Every closed walk of the chain crosses whole blocks, so this is a
        diagonal similarity of Φ(θ)Γ and keeps the spectral radius.
        """
        diagonal = np.zeros(self.states)
        diagonal[:self.n] = log_vlc_term / self.n
        diagonal[self.n + 1:2 * self.n + 1] = log_rf_term / self.n
        return diagonal

    def cycle_lower_bound(self, log_vlc_term: float, log_rf_term: float) -> float:
        """Largest geometric-mean cycle weight, a lower bound on log sp(Φ(θ)Γ)"""
        with np.errstate(divide="ignore"):
            log_stay_v = math.log(self.delta_v) if self.delta_v > 0 else -math.inf
            log_stay_r = math.log(self.delta_r) if self.delta_r > 0 else -math.inf
        cycles = [
            (log_stay_v + log_vlc_term) / self.n,
            (log_stay_r + log_rf_term) / self.n,
            (log_stay_v + log_stay_r + log_vlc_term + log_rf_term) / (2 * self.n + 2),
        ]
        return max(c for c in cycles if not math.isnan(c))

    def stationary_distribution(self) -> np.ndarray:
        gamma = self.transition_matrix()
        system = gamma - np.eye(self.states)
        system[-1, :] = 1.0
        rhs = np.zeros(self.states)
        rhs[-1] = 1.0
        return np.linalg.lstsq(system, rhs, rcond=None)[0]


def lmgf_handover(spec: HandoverChainSpec, log_vlc_term: float, log_rf_term: float) -> float:
    """Per-sub-frame log-MGF log sp(Φ(θ)Γ) given θV and log E[e^{θR} | RF]"""
    if spec.delta == 0.0:
        log_rf_term = 0.0
    if spec.delta == 1.0:
        log_vlc_term = 0.0
    with np.errstate(divide="ignore"):
        log_gamma = np.log(spec.transition_matrix())
    log_matrix = spec.balanced_diagonal(log_vlc_term, log_rf_term)[:, None] + log_gamma
    shift = spec.cycle_lower_bound(log_vlc_term, log_rf_term)
    return log_spectral_radius(log_matrix, log_shift=shift)


def lmgf_handover_renewal(spec: HandoverChainSpec, log_vlc_term: float, log_rf_term: float) -> float:
    """log sp(Φ(θ)Γ) from the return-to-state-1 renewal equation

    Solves G(ℓ) = 0 where G is the log generating function of first returns to
    state 1 weighted by e^{-ℓ} per sub-frame. Independent of the power iteration.
    """
    n, delta = spec.n, spec.delta
    if delta == 0.0:
        return log_vlc_term / n
    if delta == 1.0:
        return log_rf_term / n
    log_stay_v, log_stay_r = math.log(1.0 - delta), math.log(delta)

    def returns(ell: float) -> float:
        vlc_cycle = log_stay_v + log_vlc_term - n * ell
        rf_loop = log_stay_r + log_rf_term - n * ell
        excursion = (log_stay_r + log_stay_v + log_vlc_term + log_rf_term - (2 * n + 2) * ell
                     - math.log(-math.expm1(rf_loop)))
        return float(np.logaddexp(vlc_cycle, excursion))

    floor = (log_stay_r + log_rf_term) / n
    # the cycle bound is at least floor and at most the root
    lo = spec.cycle_lower_bound(log_vlc_term, log_rf_term)
    if lo <= floor:
        lo = floor + 1e-12 * max(1.0, abs(floor))
        if returns(lo) <= 0.0:
            return lo
    hi = lo + 1.0
    while returns(hi) > 0.0:
        hi += 2.0 * (hi - lo)
    return bisect_root(returns, lo, hi, "the handover renewal equation")


def solve_theta_star(source: SourceSpec, spec: HandoverChainSpec,
                     handover_lmgf: Callable[[float], float], mean_service: float) -> float:
    """Positive root of F(θ) = Λ_a(θ) + nΛ_H(-θ)

    handover_lmgf is the per-sub-frame log-MGF and mean_service the average
    service per frame of n sub-frames.
    """
    if source.mean_rate <= 0.0:
        raise NoPositiveRootError("the source carries no traffic")
    if source.mean_rate >= mean_service:
        raise NoPositiveRootError(
            f"mean arrival {source.mean_rate:g} exceeds handover capacity {mean_service:g} bits/frame")

    def balance(theta: float) -> float:
        return float(lmgf_arrival_asymptotic(source, theta)) + spec.n * handover_lmgf(-theta)

    theta = 1e-3 / max(source.lambda_bits_per_frame, 1.0)
    if balance(theta) > 0:
        while balance(theta) > 0:
            theta /= 2.0
            if theta < 1e-15:
                raise NoPositiveRootError("F stays positive near zero")
        lo, hi = theta, 2.0 * theta
    else:
        while balance(theta) < 0:
            theta *= 2.0
            if theta > 1e6:
                raise NoPositiveRootError("F never crosses zero")
        lo, hi = theta / 2.0, theta
    return bisect_root(balance, lo, hi, "the handover balance equation", xtol=1e-12 * hi)

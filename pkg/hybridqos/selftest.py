"""
Self-test suites - solver residuals, identities, dominance and consistency checks

Each check is a small class registered by name, the same way the orchestrator
registers its analysers. Run all of them with `hybridqos selftest` or a subset
with `--checks`.
"""

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from decimal import Decimal, localcontext
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .errors import HybridQosError
from .geometry_channel import (RfChannelSpec, VlcChannelSpec, noise_powers, sample_fading_power,
                               vlc_gain)
from .qos_engine import (Link, LinkModel, lmgf_handover, lmgf_handover_renewal, rate_balance_residual,
                         select_link)
from .rate_bounds import FrameSpec, PowerBudget, solve_ab, solve_mu_star, vlc_rate
from .source import SourceSpec, lmgf_arrival_asymptotic, lmgf_arrival_finite
from .strategies import (HandoverService, Hybrid1Service, RfService, Strategy, VlcService,
                         build_service)

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
SELFTEST_SEED = 20240611
HANDOVER_NS = (2, 4, 8, 16, 32, 64)


class CheckStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIP = "skip"


@dataclass
class CheckResult:
    """One verdict of one check"""
    check_name: str
    status: CheckStatus
    message: str
    value: Optional[float] = None
    limit: Optional[float] = None

    def __str__(self) -> str:
        emoji = {"pass": "✅", "fail": "❌", "skip": "⚠️"}[self.status.value]
        numbers = ""
        if self.value is not None and self.limit is not None:
            numbers = f" ({self.value:.3g} vs limit {self.limit:.3g})"
        return f"{emoji} [{self.check_name}] {self.message}{numbers}"


class BaseCheck(ABC):
    """Base class for every self-test check"""

    def __init__(self, name: str, description: str):
        self.name = name
        self.description = description

    @abstractmethod
    def run(self, quick: bool) -> List[CheckResult]:
        """Run the check and return its verdicts"""
        pass

    def _verdict(self, ok: bool, message: str, value: Optional[float] = None,
                 limit: Optional[float] = None) -> CheckResult:
        status = CheckStatus.PASS if ok else CheckStatus.FAIL
        return CheckResult(self.name, status, message, value, limit)


def _draws(quick: bool) -> int:
    return 100 if quick else 1000


def table_link(avg_power_dbm: float = 30.0, ratio: float = 0.7, distance_m: float = 15.0) -> LinkModel:
    """Default channels with the given power budget and RF distance"""
    return LinkModel(RfChannelSpec(distance_m=distance_m), VlcChannelSpec(),
                     PowerBudget.from_dbm(avg_power_dbm, ratio), FrameSpec())


def random_configs(count: int, seed: int = SELFTEST_SEED) -> Iterator[Tuple[LinkModel, SourceSpec, float]]:
    """(link, source, θ) with P_avg in [20, 40] dBm, ν in [0.05, 1), θ log-uniform in [1e-4, 1e-1]"""
    rng = np.random.default_rng(seed)
    rf, vlc, frame = RfChannelSpec(), VlcChannelSpec(), FrameSpec()
    for _ in range(count):
        budget = PowerBudget.from_dbm(rng.uniform(20.0, 40.0), rng.uniform(0.05, 1.0))
        source = SourceSpec(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95))
        theta = 10.0 ** rng.uniform(-4.0, -1.0)
        yield LinkModel(rf, vlc, budget, frame), source, theta


def ab_residuals(p_avg: float, p_peak: float, a: float, b: float) -> Tuple[float, float]:
    """Residuals of both truncated-Gaussian equations, evaluated in 50-digit decimal"""
    with localcontext() as ctx:
        ctx.prec = 50
        a_, b_, peak = Decimal(a), Decimal(b), Decimal(p_peak)
        half = b_ * peak / 2
        decay = (-half).exp()
        first = a_ / b_ * (1 - decay) - 1
        second = 2 * a_ / b_ / (b_ * peak) * (1 - decay * (1 + half)) - Decimal(p_avg) / peak
        return float(first), float(second)


def mu_residual(mu: float, ratio: float) -> float:
    with localcontext() as ctx:
        ctx.prec = 50
        m = Decimal(mu)
        decay = (-m).exp()
        return float(1 / m - decay / (1 - decay) - Decimal(ratio))


class SolveAbResidualCheck(BaseCheck):

    def __init__(self):
        super().__init__("solve_ab_residuals",
                         "truncated-Gaussian (a, b) residuals from the raw equations")

    def run(self, quick: bool) -> List[CheckResult]:
        rng = np.random.default_rng(SELFTEST_SEED)
        count = 20 if quick else 200
        worst = (0.0, None)
        started = time.perf_counter()
        for _ in range(count):
            p_avg = 10.0 ** ((rng.uniform(20.0, 40.0) - 30.0) / 10.0)
            ratio = rng.uniform(0.02, 0.98)
            constants = solve_ab(p_avg, p_avg / ratio)
            if constants.b == 0.0:
                continue
            residuals = ab_residuals(p_avg, p_avg / ratio, constants.a, constants.b)
            largest = max(abs(r) for r in residuals)
            if largest > worst[0]:
                worst = (largest, (p_avg, ratio))
        elapsed = time.perf_counter() - started
        where = "" if worst[1] is None else f", worst at P_avg={worst[1][0]:.4g} W ν={worst[1][1]:.4f}"
        return [
            self._verdict(worst[0] < RESIDUAL_TOL, f"{count} configurations{where}", worst[0],
                          RESIDUAL_TOL),
            self._verdict(elapsed < 10.0, f"{count} solves in {elapsed:.2f} s", elapsed, 10.0),
        ]


class MuStarResidualCheck(BaseCheck):

    def __init__(self):
        super().__init__("mu_star_residuals", "μ* residuals and VLC rate continuity at ν = 1/2")

    def run(self, quick: bool) -> List[CheckResult]:
        rng = np.random.default_rng(SELFTEST_SEED + 1)
        count = 20 if quick else 200
        worst = 0.0
        for ratio in rng.uniform(1e-3, 0.5 - 1e-3, count):
            worst = max(worst, abs(mu_residual(solve_mu_star(ratio), ratio)))
        vlc = VlcChannelSpec()
        _, sigma_v2 = noise_powers(RfChannelSpec(), vlc)
        gain = vlc_gain(vlc)

        def rate(ratio: float) -> float:
            return vlc_rate(gain, vlc.responsivity_a_per_w, sigma_v2, FrameSpec(), 1.0,
                            1.0 / ratio).bits_per_frame

        at_half = rate(0.5)
        jump = abs(rate(0.5 - 1e-4) - at_half) / at_half
        return [
            self._verdict(worst < RESIDUAL_TOL, f"{count} ratios in (0, 1/2)", worst, RESIDUAL_TOL),
            self._verdict(jump < 1e-3, "relative VLC rate jump across ν = 1/2", jump, 1e-3),
        ]


class EffectiveCapacityCheck(BaseCheck):

    def __init__(self):
        super().__init__("effective_capacity",
                         "α = 0, β = 1 reduces ρ to the effective capacity")

    def run(self, quick: bool) -> List[CheckResult]:
        link = table_link()
        source = SourceSpec(0.0, 1.0)
        vlc, rf = VlcService(link), RfService(link)
        v = link.vlc_bits_per_frame
        results = []
        for theta in (1e-4, 1e-3, 1e-2):
            rho_v = vlc.rho(source, theta).rho_bits_per_frame
            gap_v = abs(rho_v - v) / v
            rho_r = rf.rho(source, theta).rho_bits_per_frame
            capacity = -link.expectation.log_mgf(-theta, link.rf_model.rate) / theta
            gap_r = abs(rho_r - capacity) / capacity
            results.append(self._verdict(gap_v < RESIDUAL_TOL, f"ρ_v = V at θ={theta:g}", gap_v,
                                         RESIDUAL_TOL))
            results.append(self._verdict(gap_r < RESIDUAL_TOL,
                                         f"ρ_r = -log E[e^(-θR)]/θ at θ={theta:g}", gap_r,
                                         RESIDUAL_TOL))
        return results


class RateBalanceIdentityCheck(BaseCheck):

    def __init__(self):
        super().__init__("rate_balance_identity",
                         "Λ_a(θ) + Λ(-θ) = 0 at λ back-substituted from ρ")

    def run(self, quick: bool) -> List[CheckResult]:
        worst = 0.0
        count = 20 if quick else 100
        for link, source, theta in random_configs(count, SELFTEST_SEED + 2):
            for service in (RfService(link), VlcService(link), Hybrid1Service(link)):
                service_neg = service.lmgf(-theta)
                rho = service.rho(source, theta).rho_bits_per_frame
                residual = rate_balance_residual(rho, source, service_neg, theta)
                worst = max(worst, abs(residual) / max(1.0, abs(service_neg)))
        return [self._verdict(worst < 1e-8, f"{count} configurations × 3 strategies", worst, 1e-8)]


class SelectionConsistencyCheck(BaseCheck):

    def __init__(self):
        super().__init__("selection_consistency",
                         "VLC/RF selection agrees with the sign of ρ_v - ρ_r")

    def run(self, quick: bool) -> List[CheckResult]:
        count = _draws(quick)
        mismatches = 0
        ties = 0
        for link, source, theta in random_configs(count):
            rf = RfService(link)
            rho_r = rf.rho(source, theta).rho_bits_per_frame
            rho_v = VlcService(link).rho(source, theta).rho_bits_per_frame
            certificate = select_link(link.vlc_bits_per_frame, rf.lmgf(-theta), source, theta)
            chose_vlc = certificate.decision is Link.VLC
            if abs(rho_v - rho_r) <= 1e-9 * max(abs(rho_v), abs(rho_r), 1.0):
                ties += 1
                continue
            if chose_vlc != (rho_v > rho_r):
                mismatches += 1
                logger.debug("selection mismatch: ρ_v=%g ρ_r=%g θ=%g", rho_v, rho_r, theta)
        note = f", {ties} numerical ties" if ties else ""
        return [self._verdict(mismatches == 0, f"{count} configurations{note}", mismatches, 0)]


class HybridDominanceCheck(BaseCheck):

    def __init__(self):
        super().__init__("hybrid_dominance", "Hybrid-I dominates both single links")

    def run(self, quick: bool) -> List[CheckResult]:
        count = _draws(quick)
        worst = 0.0
        pathwise = 0
        frames = 10_000 if quick else 100_000
        for index, (link, source, theta) in enumerate(random_configs(count)):
            hybrid = Hybrid1Service(link)
            rf, vlc = RfService(link), VlcService(link)
            rho_h = hybrid.rho(source, theta).rho_bits_per_frame
            best = max(rf.rho(source, theta).rho_bits_per_frame,
                       vlc.rho(source, theta).rho_bits_per_frame)
            worst = max(worst, (best - rho_h) / max(best, 1.0))
            if index < 10:
                rng = np.random.default_rng([SELFTEST_SEED, index])
                h2 = sample_fading_power(link.sampler, frames, rng)
                floor = np.maximum(rf.frame_service(h2), vlc.frame_service(h2))
                slack = 1e-9 * max(link.vlc_bits_per_frame, 1.0)
                pathwise += int(np.sum(hybrid.frame_service(h2) < floor - slack))
        return [
            self._verdict(worst <= 1e-9, f"ρ_h1 >= max(ρ_r, ρ_v) on {count} configurations",
                          worst, 1e-9),
            self._verdict(pathwise == 0, f"frame-by-frame dominance, 10 × {frames} frames",
                          pathwise, 0),
        ]


class RhoMonotonicityCheck(BaseCheck):

    def __init__(self):
        super().__init__("rho_monotonicity", "ρ(θ) is non-increasing in θ for every strategy")

    def run(self, quick: bool) -> List[CheckResult]:
        link = table_link()
        source = SourceSpec(0.3, 0.7)
        thetas = np.geomspace(1e-4, 1e-1, 10 if quick else 30)
        results = []
        for strategy in Strategy:
            service = build_service(strategy, link, handover_n=4 if quick else 8)
            rhos = np.array([service.rho(source, t).rho_bits_per_frame for t in thetas])
            rises = np.diff(rhos) / np.maximum(rhos[:-1], 1.0)
            largest = float(max(rises.max(), 0.0))
            results.append(self._verdict(largest <= 1e-9, f"{strategy.value} over {thetas.size} θ",
                                         largest, 1e-9))
        return results


class HandoverConvergenceCheck(BaseCheck):

    def __init__(self):
        super().__init__("handover_convergence",
                         "handover ρ(n) grows with n towards Hybrid-I")

    def run(self, quick: bool) -> List[CheckResult]:
        link = table_link()
        source = SourceSpec(0.3, 0.7)
        theta = 0.01
        results = []
        rhos = []
        worst_gap = 0.0
        for n in HANDOVER_NS:
            service = HandoverService(link, n)
            log_v = theta * service.v_bits
            log_r = service.log_rf_conditional(theta)
            iterated = lmgf_handover(service.chain, log_v, log_r)
            renewal = lmgf_handover_renewal(service.chain, log_v, log_r)
            worst_gap = max(worst_gap, abs(iterated - renewal) / max(1.0, abs(renewal)))
            rhos.append(service.rho(source, theta).rho_bits_per_frame)
        hybrid = Hybrid1Service(link).rho(source, theta).rho_bits_per_frame
        drops = [b - a for a, b in zip(rhos, rhos[1:]) if b < a * (1.0 - 1e-9)]
        shortfall = abs(hybrid - rhos[-1]) / hybrid
        results.append(self._verdict(worst_gap < 1e-8, "power iteration matches the renewal root",
                                     worst_gap, 1e-8))
        results.append(self._verdict(not drops, f"ρ non-decreasing over n = {list(HANDOVER_NS)}",
                                     len(drops), 0))
        results.append(self._verdict(shortfall < 0.02, "n = 64 within 2% of Hybrid-I", shortfall, 0.02))
        return results


class FiniteHorizonCheck(BaseCheck):

    def __init__(self):
        super().__init__("finite_horizon", "Λ_a(θ, t) approaches Λ_a(θ) by t = 200")

    def run(self, quick: bool) -> List[CheckResult]:
        results = []
        source = SourceSpec(0.3, 0.7, 1.0)
        worst = max(abs(lmgf_arrival_finite(source, z, 200) - lmgf_arrival_asymptotic(source, z))
                    for z in (0.1, 0.5, 1.0, 2.0, 5.0))
        results.append(self._verdict(worst < 1e-3, "α = 0.3, β = 0.7, θλ <= 5", worst, 1e-3))
        bursty = SourceSpec(0.05, 0.1, 1.0)
        limit = float(lmgf_arrival_asymptotic(bursty, 2.0))
        near = abs(lmgf_arrival_finite(bursty, 2.0, 2000) - limit)
        far = abs(lmgf_arrival_finite(bursty, 2.0, 200) - limit)
        results.append(self._verdict(near < far, "gap shrinks from t = 200 to t = 2000 (α = 0.05, β = 0.1)",
                                     near, far))
        return results


class QuadratureMonteCarloCheck(BaseCheck):

    def __init__(self):
        super().__init__("quadrature_vs_monte_carlo", "quadrature and Monte Carlo log-MGFs agree")

    def run(self, quick: bool) -> List[CheckResult]:
        link = table_link()
        if quick:
            link.expectation.mc_samples = 100_000
        tolerance = 2e-2 if quick else 1e-2
        mean = link.expectation.mean(link.rf_model.rate)
        results = []
        for scale in (-2.0, -0.5, 0.5):
            theta = scale / mean
            gap = link.expectation.cross_validate(theta, link.rf_model.rate)
            results.append(self._verdict(gap < tolerance, f"RF rate at θ = {scale:g}/E[R]", gap,
                                         tolerance))
        return results


class SelfTest:
    """Runs registered checks and prints their verdicts grouped by status"""

    def __init__(self):
        self.checks: Dict[str, BaseCheck] = {
            'solve_ab_residuals': SolveAbResidualCheck(),
            'mu_star_residuals': MuStarResidualCheck(),
            'effective_capacity': EffectiveCapacityCheck(),
            'rate_balance_identity': RateBalanceIdentityCheck(),
            'selection_consistency': SelectionConsistencyCheck(),
            'hybrid_dominance': HybridDominanceCheck(),
            'rho_monotonicity': RhoMonotonicityCheck(),
            'handover_convergence': HandoverConvergenceCheck(),
            'finite_horizon': FiniteHorizonCheck(),
            'quadrature_vs_monte_carlo': QuadratureMonteCarloCheck(),
        }

    def run_checks(self, names: Optional[List[str]] = None, quick: bool = False) -> List[CheckResult]:
        """Run the named checks or all of them; a check that raises is recorded as failed"""
        if names is None:
            names = list(self.checks.keys())
        results = []
        for name in names:
            if name not in self.checks:
                print(f"⚠️  Unknown check '{name}', skipping")
                continue
            print(f"🔍 Running {name}...")
            started = time.perf_counter()
            try:
                found = self.checks[name].run(quick)
            except HybridQosError as e:
                found = [CheckResult(name, CheckStatus.FAIL, f"raised {type(e).__name__}: {e}")]
            results.extend(found)
            logger.debug("%s finished in %.2f s", name, time.perf_counter() - started)
        return results

    def print_results(self, results: List[CheckResult]) -> None:
        by_status = {status: [r for r in results if r.status is status] for status in CheckStatus}
        print(f"\n🔍 {len(results)} verdicts:")
        print(f"  ✅ {len(by_status[CheckStatus.PASS])} passed")
        print(f"  ❌ {len(by_status[CheckStatus.FAIL])} failed")
        if by_status[CheckStatus.SKIP]:
            print(f"  ⚠️  {len(by_status[CheckStatus.SKIP])} skipped")
        print()
        for status in (CheckStatus.FAIL, CheckStatus.SKIP, CheckStatus.PASS):
            for result in by_status[status]:
                print(f"  {result}")

    def list_checks(self) -> None:
        print("Available checks:")
        width = max(len(name) for name in self.checks)
        for name, check in self.checks.items():
            print(f"    {name:<{width}}  - {check.description}")


def run_selftest(quick: bool = False, checks: Optional[List[str]] = None) -> List[CheckResult]:
    suite = SelfTest()
    results = suite.run_checks(checks, quick)
    suite.print_results(results)
    return results


def failed(results: List[CheckResult]) -> bool:
    return any(r.status is CheckStatus.FAIL for r in results)

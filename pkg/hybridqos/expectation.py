"""
Expectation engine over the Rician |h|² law

Computes log E[exp(θ·r(|h|²)) ; lower < |h|² <= upper] for a vectorised rate
function r. Quadrature is composite Gauss-Legendre on geometrically spaced
panels (rates are logarithmic in |h|², so the integrand has boundary layers
near zero) with the domain cut at the 1 - 1e-10 quantile. Everything is summed
in log space with logsumexp.
"""

import logging
import math
import threading
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import QuadratureNotConvergedError
from .geometry_channel import FadingSampler, sample_fading_power

logger = logging.getLogger(__name__)

RateFunction = Callable[[np.ndarray], np.ndarray]

TAIL_PROBABILITY = 1e-10
PANEL_FLOOR = 1e-16


class ExpectationMethod(Enum):
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte-carlo"
    AUTO = "auto"


class FadingExpectation:
    """Log-MGF evaluator for functions of the fading power of one sampler"""

    def __init__(self, sampler: FadingSampler, method: ExpectationMethod = ExpectationMethod.AUTO,
                 mc_samples: int = 1_000_000, panels: int = 48, base_nodes: int = 16,
                 max_nodes: int = 512, rel_tol: float = 1e-8):
        self.sampler = sampler
        self.method = ExpectationMethod(method)
        self.mc_samples = mc_samples
        self.panels = panels
        self.base_nodes = base_nodes
        self.max_nodes = max_nodes
        self.rel_tol = rel_tol
        self._lock = threading.Lock()
        self._nodes: Dict[Tuple[float, float, int], Tuple[np.ndarray, np.ndarray]] = {}
        self._mc_draws: Optional[np.ndarray] = None
        if sampler.deterministic:
            self.upper_cut = abs(sampler.mean) ** 2
        else:
            self.upper_cut = float(sampler.distribution.isf(TAIL_PROBABILITY))

    @property
    def point_mass(self) -> Optional[float]:
        return abs(self.sampler.mean) ** 2 if self.sampler.deterministic else None

    def probability(self, lower: float = 0.0, upper: float = math.inf) -> float:
        """Pr{lower < |h|² <= upper}"""
        if upper == math.inf:
            return self.sampler.sf(lower)
        return max(0.0, self.sampler.cdf(upper) - self.sampler.cdf(lower))

    def _quadrature_nodes(self, lower: float, upper: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
        key = (lower, upper, n)
        cached = self._nodes.get(key)
        if cached is not None:
            return cached
        first = max(lower, upper * PANEL_FLOOR)
        edges = np.geomspace(first, upper, self.panels + 1)
        if lower < first:
            edges = np.concatenate(([lower], edges))
        reference, weights = np.polynomial.legendre.leggauss(n)
        left, right = edges[:-1, None], edges[1:, None]
        half = 0.5 * (right - left)
        nodes = (left + half * (reference[None, :] + 1.0)).ravel()
        log_weights = (np.log(half * weights[None, :])).ravel() + \
            self.sampler.distribution.logpdf(nodes)
        with self._lock:
            self._nodes[key] = (nodes, log_weights)
        return nodes, log_weights

    def quadrature(self, theta: float, rate: RateFunction, lower: float = 0.0,
                   upper: float = math.inf) -> float:
        if self.point_mass is not None:
            return self._point_mass_value(theta, rate, lower, upper)
        upper = min(upper, self.upper_cut)
        if upper <= lower:
            return -math.inf
        previous = None
        n = self.base_nodes
        change = math.inf
        while n <= self.max_nodes:
            nodes, log_weights = self._quadrature_nodes(lower, upper, n)
            value = float(logsumexp(theta * rate(nodes) + log_weights))
            if previous is not None:
                if value == previous:
                    return value
                change = abs(value - previous)
                if change < self.rel_tol:
                    return value
            previous = value
            n *= 2
        raise QuadratureNotConvergedError(theta, change)

    def _draws(self) -> np.ndarray:
        if self._mc_draws is None:
            draws = sample_fading_power(self.sampler, self.mc_samples)
            with self._lock:
                if self._mc_draws is None:
                    self._mc_draws = draws
        return self._mc_draws

    def monte_carlo(self, theta: float, rate: RateFunction, lower: float = 0.0,
                    upper: float = math.inf) -> float:
        if self.point_mass is not None:
            return self._point_mass_value(theta, rate, lower, upper)
        draws = self._draws()
        inside = draws[(draws > lower) & (draws <= upper)] if (lower > 0 or upper < math.inf) else draws
        if inside.size == 0:
            return -math.inf
        return float(logsumexp(theta * rate(inside)) - math.log(draws.size))

    def _point_mass_value(self, theta: float, rate: RateFunction, lower: float, upper: float) -> float:
        mass = self.point_mass
        if lower < mass <= upper or (lower == 0.0 and mass == 0.0):
            return float(theta * rate(np.array([mass]))[0])
        return -math.inf

    def log_mgf(self, theta: float, rate: RateFunction, lower: float = 0.0,
                upper: float = math.inf) -> float:
        """log ∫ e^{θ r(x)} f(x) dx over (lower, upper], unnormalised"""
        if self.method is ExpectationMethod.MONTE_CARLO:
            return self.monte_carlo(theta, rate, lower, upper)
        try:
            return self.quadrature(theta, rate, lower, upper)
        except QuadratureNotConvergedError as e:
            if self.method is ExpectationMethod.QUADRATURE:
                raise
            logger.warning("%s; falling back to Monte Carlo", e)
            return self.monte_carlo(theta, rate, lower, upper)

    def mean(self, rate: RateFunction, lower: float = 0.0, upper: float = math.inf) -> float:
        """E[r(|h|²) ; region] by the same quadrature nodes"""
        if self.point_mass is not None:
            mass = self.point_mass
            inside = lower < mass <= upper or (lower == 0.0 and mass == 0.0)
            return float(rate(np.array([mass]))[0]) if inside else 0.0
        upper = min(upper, self.upper_cut)
        if upper <= lower:
            return 0.0
        nodes, log_weights = self._quadrature_nodes(lower, upper, 4 * self.base_nodes)
        return float(np.sum(rate(nodes) * np.exp(log_weights)))

    def cross_validate(self, theta: float, rate: RateFunction) -> float:
        """Relative gap between the quadrature and Monte Carlo log-MGFs"""
        quad = self.quadrature(theta, rate)
        sampled = self.monte_carlo(theta, rate)
        return abs(quad - sampled) / max(abs(quad), 1e-300)

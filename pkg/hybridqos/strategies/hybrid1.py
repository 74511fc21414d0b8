"""
Hybrid-I service: each frame goes over the better link

RF carries the frame iff |h|² > κ where R_l(κ) = V, otherwise VLC does. The
restricted expectation over (κ, ∞) is unnormalised, so Λ(0) = 0.
"""

from typing import Any, Dict

import numpy as np

from ..qos_engine import LinkModel, hybrid1_threshold
from .base_strategy import ServiceLmgf, Strategy, log_probability


class Hybrid1Service(ServiceLmgf):

    def __init__(self, link: LinkModel, strategy: Strategy = Strategy.HYBRID1):
        super().__init__(strategy, link)
        self.v_bits = link.vlc_bits_per_frame
        self.kappa = hybrid1_threshold(self.v_bits, link.rf_model)
        # δ = Pr{|h|² > κ}
        self.delta = link.expectation.probability(self.kappa)
        self.log_p_vlc = log_probability(link.sampler.cdf(self.kappa))

    def log_rf_part(self, theta: float) -> float:
        """log ∫_κ^∞ e^{θ R_l} f d|h|²"""
        if self.delta == 0.0:
            return -np.inf
        return self.link.expectation.log_mgf(theta, self.link.rf_model.rate, lower=self.kappa)

    def _lmgf(self, theta: float) -> float:
        return float(np.logaddexp(self.log_rf_part(theta), self.log_p_vlc + theta * self.v_bits))

    def rf_mean_part(self) -> float:
        if self.delta == 0.0:
            return 0.0
        return self.link.expectation.mean(self.link.rf_model.rate, lower=self.kappa)

    def mean_rate(self) -> float:
        return self.rf_mean_part() + (1.0 - self.delta) * self.v_bits

    def uses_rf(self, h2: np.ndarray) -> np.ndarray:
        return np.asarray(h2, dtype=float) > self.kappa

    def frame_service(self, h2: np.ndarray) -> np.ndarray:
        h2 = np.asarray(h2, dtype=float)
        return np.where(self.uses_rf(h2), self.link.rf_model.rate(h2), self.v_bits)

    def auxiliary(self, theta: float) -> Dict[str, Any]:
        return {"kappa": self.kappa, "delta": self.delta, "v_bits_per_frame": self.v_bits}

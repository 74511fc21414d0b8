"""
Hybrid-I with handover delay

A frame is split into n sub-frames; a transmission block of n sub-frames
carries one frame's worth of service and every link switch costs one idle
sub-frame. The per-sub-frame log-MGF is the log spectral radius of Φ(θ)Γ and
the per-frame service log-MGF is n times that.
"""

import math
from typing import Any, Dict

from ..qos_engine import HandoverChainSpec, LinkModel, lmgf_handover, solve_theta_star
from ..source import SourceSpec
from .base_strategy import Strategy
from .hybrid1 import Hybrid1Service


class HandoverService(Hybrid1Service):
    """frame_service gives the service of one block; the simulator inserts the idle sub-frames"""

    def __init__(self, link: LinkModel, n: int):
        super().__init__(link, Strategy.HANDOVER)
        self.chain = HandoverChainSpec(n, self.delta, link.frame.frame_duration_s)
        self.n = self.chain.n
        self._log_delta = math.log(self.delta) if self.delta > 0.0 else -math.inf

    def log_rf_conditional(self, theta: float) -> float:
        """log E[e^{θ R_l} | |h|² > κ]"""
        if self.delta == 0.0:
            return 0.0
        return self.log_rf_part(theta) - self._log_delta

    def sub_frame_lmgf(self, theta: float) -> float:
        if theta == 0.0:
            return 0.0
        return lmgf_handover(self.chain, theta * self.v_bits, self.log_rf_conditional(theta))

    def _lmgf(self, theta: float) -> float:
        return self.n * self.sub_frame_lmgf(theta)

    def mean_rate(self) -> float:
        """Service per n sub-frames averaged over the stationary chain"""
        stationary = self.chain.stationary_distribution()
        rf_conditional = self.rf_mean_part() / self.delta if self.delta > 0.0 else 0.0
        per_sub_frame = (stationary[self.n - 1] * self.v_bits
                         + stationary[2 * self.n] * rf_conditional)
        return self.n * float(per_sub_frame)

    def theta_star(self, source: SourceSpec) -> float:
        """θ* with Λ_a(θ*) = -nΛ_H(-θ*) for the source's own λ"""
        return solve_theta_star(source, self.chain, self.sub_frame_lmgf, self.mean_rate())

    def switch_probability(self) -> float:
        """Fraction of block ends followed by a handover sub-frame"""
        stationary = self.chain.stationary_distribution()
        block_ends = stationary[self.n - 1] + stationary[2 * self.n]
        if block_ends <= 0.0:
            return 0.0
        return float((stationary[self.n - 1] * self.delta
                      + stationary[2 * self.n] * (1.0 - self.delta)) / block_ends)

    def auxiliary(self, theta: float) -> Dict[str, Any]:
        aux = super().auxiliary(theta)
        aux.update({"n": self.n, "sub_frame_duration_s": self.chain.sub_frame_duration_s,
                    "switch_probability": self.switch_probability()})
        return aux

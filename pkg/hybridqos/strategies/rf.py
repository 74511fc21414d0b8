"""
RF-only service: R_l(|h|²) in every frame
"""

import numpy as np

from ..qos_engine import LinkModel, lmgf_rf
from .base_strategy import ServiceLmgf, Strategy


class RfService(ServiceLmgf):
    """Λ_r(θ) = log E_h[e^{θ R_l}]"""

    def __init__(self, link: LinkModel):
        super().__init__(Strategy.RF, link)

    def _lmgf(self, theta: float) -> float:
        return lmgf_rf(theta, self.link)

    def mean_rate(self) -> float:
        return self.link.expectation.mean(self.link.rf_model.rate)

    def frame_service(self, h2: np.ndarray) -> np.ndarray:
        return np.asarray(self.link.rf_model.rate(np.asarray(h2, dtype=float)), dtype=float)

"""
VLC-only service: the constant rate V
"""

from typing import Any, Dict

import numpy as np

from ..qos_engine import LinkModel, lmgf_vlc
from .base_strategy import ServiceLmgf, Strategy


class VlcService(ServiceLmgf):

    def __init__(self, link: LinkModel):
        super().__init__(Strategy.VLC, link)

    def _lmgf(self, theta: float) -> float:
        return lmgf_vlc(theta, self.link.vlc_bits_per_frame)

    def mean_rate(self) -> float:
        return self.link.vlc_bits_per_frame

    @property
    def deterministic_rate(self) -> float:
        return self.link.vlc_bits_per_frame

    def frame_service(self, h2: np.ndarray) -> np.ndarray:
        return np.full(np.shape(h2), self.link.vlc_bits_per_frame, dtype=float)

    def auxiliary(self, theta: float) -> Dict[str, Any]:
        constants = self.link.vlc_constants
        return {"v_bits_per_frame": constants.bits_per_frame, "regime": constants.regime.value,
                "mu_star": constants.mu_star}

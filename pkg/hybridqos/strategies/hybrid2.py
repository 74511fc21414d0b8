"""
Hybrid-II service: both links carry data, the average power is split γ : 1-γ

In per-frame mode γ* maximises R_l(γ) + V(γ) for each fading draw; the
maximised sum rate is tabulated once on a log-spaced |h|² grid and
interpolated, so the analysis and the simulator see the same service. In
fixed mode a single γ applies to every frame and Λ(θ) = θV(γ) + Λ_r(θ).
"""

import logging
import math
from enum import Enum
from typing import Any, Dict

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..qos_engine import LinkModel, hybrid2_split
from .base_strategy import ServiceLmgf, Strategy

logger = logging.getLogger(__name__)

PROFILE_POINTS = 96
PROFILE_DECADES = 16.0


class Hybrid2Mode(Enum):
    PER_FRAME = "per-frame"
    FIXED = "fixed"


class SumRateProfile:
    """γ*(|h|²) and max_γ{R_l(γ) + V(γ)} on a log-spaced |h|² grid"""

    def __init__(self, link: LinkModel, points: int = PROFILE_POINTS):
        self.link = link
        hi = 4.0 * link.expectation.upper_cut
        self.hi = hi
        self.lo = hi * 10.0 ** (-PROFILE_DECADES)
        self.log_grid = np.linspace(math.log(self.lo), math.log(hi), points)
        splits = np.array([hybrid2_split(math.exp(x), link) for x in self.log_grid])
        self.gammas = splits[:, 0]
        self.totals = splits[:, 1]
        # the maximised sum rate is nondecreasing in |h|²; PCHIP keeps that shape
        self._total = PchipInterpolator(self.log_grid, self.totals)
        logger.debug("sum-rate profile: %d points, γ* in [%.4f, %.4f]", points,
                     self.gammas.min(), self.gammas.max())

    def _clipped_log(self, h2: np.ndarray) -> np.ndarray:
        return np.log(np.clip(h2, self.lo, self.hi))

    def sum_rate(self, h2: np.ndarray) -> np.ndarray:
        h2 = np.asarray(h2, dtype=float)
        flat = np.atleast_1d(h2).ravel()
        out = np.asarray(self._total(self._clipped_log(flat)), dtype=float)
        # beyond the tabulated range (probability below 1e-10) solve exactly
        for index in np.flatnonzero(flat > self.hi):
            out[index] = hybrid2_split(float(flat[index]), self.link)[1]
        return out.reshape(h2.shape) if h2.ndim else float(out[0])

    def gamma(self, h2: np.ndarray) -> np.ndarray:
        return np.interp(self._clipped_log(np.asarray(h2, dtype=float)), self.log_grid, self.gammas)


class Hybrid2Service(ServiceLmgf):

    def __init__(self, link: LinkModel, mode: Hybrid2Mode = Hybrid2Mode.PER_FRAME,
                 gamma: float = 0.5, profile_points: int = PROFILE_POINTS):
        super().__init__(Strategy.HYBRID2, link)
        self.mode = Hybrid2Mode(mode)
        if self.mode is Hybrid2Mode.FIXED:
            if not 0.0 < gamma <= 1.0:
                raise ValueError("fixed-mode gamma must lie in (0, 1]")
            self.gamma = gamma
            p_avg_r, p_avg_v = link.budget.split(gamma)
            self.rf_model = link.rf_model_at(p_avg_r)
            self.v_bits = link.vlc_rate_at(p_avg_v).bits_per_frame
            self.profile = None
        else:
            self.gamma = None
            self.profile = SumRateProfile(link, profile_points)

    def _lmgf(self, theta: float) -> float:
        if self.profile is not None:
            return self.link.expectation.log_mgf(theta, self.profile.sum_rate)
        return theta * self.v_bits + self.link.expectation.log_mgf(theta, self.rf_model.rate)

    def mean_rate(self) -> float:
        if self.profile is not None:
            return self.link.expectation.mean(self.profile.sum_rate)
        return self.v_bits + self.link.expectation.mean(self.rf_model.rate)

    def frame_service(self, h2: np.ndarray) -> np.ndarray:
        h2 = np.asarray(h2, dtype=float)
        if self.profile is not None:
            return self.profile.sum_rate(h2)
        return self.rf_model.rate(h2) + self.v_bits

    def auxiliary(self, theta: float) -> Dict[str, Any]:
        if self.profile is None:
            return {"mode": self.mode.value, "gamma": self.gamma, "v_bits_per_frame": self.v_bits}
        return {"mode": self.mode.value,
                "gamma_mean": self.link.expectation.mean(self.profile.gamma)}

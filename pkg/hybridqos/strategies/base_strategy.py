"""
Base service classes and result records for the transmission strategies
"""

import logging
import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from ..qos_engine import LinkModel, check_theta, max_avg_arrival_rate, rate_balance_residual
from ..source import SourceSpec

logger = logging.getLogger(__name__)


class Strategy(Enum):
    """Transmission strategies analysed by the engine"""
    RF = "rf"
    VLC = "vlc"
    HYBRID1 = "hybrid1"    # one link per frame, RF iff |h|² > κ
    HYBRID2 = "hybrid2"    # both links, power split γ
    HANDOVER = "handover"  # hybrid1 plus one idle sub-frame per switch


@dataclass
class StrategyResult:
    """ρ(θ) of one strategy together with the quantities behind it"""
    strategy: Strategy
    theta: float
    rho_bits_per_frame: float
    mean_service_bits_per_frame: float
    auxiliary: Dict[str, Any] = field(default_factory=dict)

    def __str__(self) -> str:
        return (f"{self.strategy.value:<9} θ={self.theta:g} "
                f"ρ={self.rho_bits_per_frame:.6g} bits/frame")


class ServiceLmgf(ABC):
    """Per-frame service process of one strategy

    Subclasses supply Λ(θ) and the per-frame service for a fading draw; the
    base class caches Λ per θ and turns it into ρ(θ).
    """

    def __init__(self, strategy: Strategy, link: LinkModel):
        self.strategy = strategy
        self.link = link
        self._cache: Dict[float, float] = {}
        self._lock = threading.Lock()

    @abstractmethod
    def _lmgf(self, theta: float) -> float:
        """Evaluate Λ(θ) without caching"""
        pass

    @abstractmethod
    def mean_rate(self) -> float:
        """E[service] in bits per frame, the θ -> 0 ceiling of ρ"""
        pass

    @abstractmethod
    def frame_service(self, h2: np.ndarray) -> np.ndarray:
        """Bits served in each frame for the given |h|² draws"""
        pass

    @property
    def deterministic_rate(self) -> Optional[float]:
        """Constant per-frame service, when the strategy has one"""
        return None

    @property
    def name(self) -> str:
        return self.strategy.value

    def lmgf(self, theta: float) -> float:
        if theta == 0.0:
            return 0.0
        cached = self._cache.get(theta)
        if cached is not None:
            return cached
        value = float(self._lmgf(theta))
        with self._lock:
            self._cache[theta] = value
        return value

    def auxiliary(self, theta: float) -> Dict[str, Any]:
        return {}

    def rho(self, source: SourceSpec, theta: float) -> StrategyResult:
        theta = check_theta(theta)
        service_neg = self.lmgf(-theta)
        rho = max_avg_arrival_rate(service_neg, source, theta)
        auxiliary = {"balance_residual": rate_balance_residual(rho, source, service_neg, theta)}
        auxiliary.update(self.auxiliary(theta))
        return StrategyResult(self.strategy, theta, rho, self.mean_rate(), auxiliary)

    def effective_capacity(self, theta: float) -> float:
        """-Λ(-θ)/θ, the constant arrival rate the service sustains at θ"""
        theta = check_theta(theta)
        return -self.lmgf(-theta) / theta

    def is_convex_at(self, theta: float, step: Optional[float] = None, tol: float = 1e-9) -> bool:
        """Second-difference spot check of Λ around θ"""
        step = step or max(abs(theta) * 1e-2, 1e-6)
        middle = self.lmgf(theta)
        second = self.lmgf(theta - step) - 2.0 * middle + self.lmgf(theta + step)
        scale = max(abs(middle), 1.0)
        if second < -tol * scale:
            logger.debug("%s: negative second difference %g at θ=%g", self.name, second, theta)
            return False
        return True


def log_probability(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf

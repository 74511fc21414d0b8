# Transmission strategies and their service log-MGFs

from typing import Dict, Type

from ..qos_engine import LinkModel
from .base_strategy import ServiceLmgf, Strategy, StrategyResult
from .handover import HandoverService
from .hybrid1 import Hybrid1Service
from .hybrid2 import Hybrid2Mode, Hybrid2Service, SumRateProfile
from .rf import RfService
from .vlc import VlcService

STRATEGY_CLASSES: Dict[Strategy, Type[ServiceLmgf]] = {
    Strategy.RF: RfService,
    Strategy.VLC: VlcService,
    Strategy.HYBRID1: Hybrid1Service,
    Strategy.HYBRID2: Hybrid2Service,
    Strategy.HANDOVER: HandoverService,
}


def build_service(strategy, link: LinkModel, *, hybrid2_mode: str = "per-frame",
                  gamma: float = 0.5, handover_n: int = 8) -> ServiceLmgf:
    """Service model of one strategy for a link; strategy may be the enum or its value"""
    strategy = Strategy(strategy)
    if strategy is Strategy.HYBRID2:
        return Hybrid2Service(link, Hybrid2Mode(hybrid2_mode), gamma)
    if strategy is Strategy.HANDOVER:
        return HandoverService(link, handover_n)
    return STRATEGY_CLASSES[strategy](link)


__all__ = [
    "STRATEGY_CLASSES", "HandoverService", "Hybrid1Service", "Hybrid2Mode", "Hybrid2Service",
    "RfService", "ServiceLmgf", "Strategy", "StrategyResult", "SumRateProfile", "VlcService",
    "build_service",
]

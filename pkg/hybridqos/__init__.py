"""
hybridqos - statistical QoS of hybrid RF/VLC transmission

Service log-MGFs of the RF-only, VLC-only, Hybrid-I, Hybrid-II and handover
strategies, maximum average arrival rates under a QoS exponent, backlog and
delay bounds, and a frame-level queue simulator to check them against.
"""

from .calculus_bounds import BoundQuery, BoundResult, backlog_bound, delay_bound
from .errors import ConfigError, HybridQosError, NumericalError
from .qos_engine import LinkModel, max_avg_arrival_rate, multi_link_select, select_link
from .scenario import Scenario, load_scenario
from .simulator import SimConfig, simulate
from .source import SourceSpec
from .strategies import Strategy, StrategyResult, build_service

__version__ = "0.1.0"

__all__ = [
    "BoundQuery", "BoundResult", "ConfigError", "HybridQosError", "LinkModel", "NumericalError",
    "Scenario", "SimConfig", "SourceSpec", "Strategy", "StrategyResult", "backlog_bound",
    "build_service", "delay_bound", "load_scenario", "max_avg_arrival_rate", "multi_link_select",
    "select_link", "simulate",
]

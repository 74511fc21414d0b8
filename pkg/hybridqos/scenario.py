"""
Scenario files: JSON (or YAML) documents mapped onto frozen dataclasses

Unknown keys are rejected and every error names the dotted key path.
Anything left out takes its default.
"""

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Type, TypeVar, Union

import yaml

from .errors import ConfigError
from .expectation import ExpectationMethod
from .geometry_channel import RfChannelSpec, VlcChannelSpec, rf_distance_to
from .qos_engine import LinkModel
from .rate_bounds import FrameSpec, PowerBudget
from .source import SourceSpec
from .strategies import Hybrid2Mode, Strategy

logger = logging.getLogger(__name__)

T = TypeVar("T")


class SweepAxis(Enum):
    PAVG_DBM = "pavg_dbm"
    THETA = "theta"
    POSITION_XY = "position_xy"
    N = "n"
    USERS = "users"
    VERTICAL_DISTANCE = "vertical_distance"
    LAMBDA = "lambda"
    BETA = "beta"


class AccessScheme(Enum):
    FDMA = "fdma"
    TDMA = "tdma"


DEFAULT_THETAS = (0.01, 0.1)
THETA_SWEEP_POINTS = 60
THETA_SWEEP_DECADES = (-4.0, 0.0)


@dataclass(frozen=True)
class BudgetSpec:
    """Average power in dBm and one or more average-to-peak ratios ν"""
    avg_power_dbm: float = 30.0
    avg_to_peak_ratio: Union[float, Tuple[float, ...]] = 0.7

    def __post_init__(self):
        ratios = self.avg_to_peak_ratio
        if isinstance(ratios, (list, tuple)):
            object.__setattr__(self, "avg_to_peak_ratio", tuple(float(r) for r in ratios))
        for ratio in self.ratios:
            PowerBudget.from_dbm(self.avg_power_dbm, ratio)

    @property
    def ratios(self) -> Tuple[float, ...]:
        if isinstance(self.avg_to_peak_ratio, tuple):
            return self.avg_to_peak_ratio
        return (float(self.avg_to_peak_ratio),)


@dataclass(frozen=True)
class FrameBlock:
    frame_duration_s: float = 1e-4

    def __post_init__(self):
        if self.frame_duration_s <= 0:
            raise ValueError("frame_duration_s must be positive")


@dataclass(frozen=True)
class AnalysisSpec:
    theta: Union[float, Tuple[float, ...]] = DEFAULT_THETAS
    epsilon: float = 1e-3
    handover_n: int = 8
    hybrid2_mode: str = Hybrid2Mode.PER_FRAME.value
    gamma: float = 0.5
    expectation: str = ExpectationMethod.AUTO.value
    optimize_split: bool = False

    def __post_init__(self):
        theta = self.theta
        thetas = tuple(float(t) for t in theta) if isinstance(theta, (list, tuple)) else (float(theta),)
        object.__setattr__(self, "theta", thetas)
        if not thetas or any(t <= 0 for t in thetas):
            raise ValueError("theta values must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if int(self.handover_n) != self.handover_n or self.handover_n < 2:
            raise ValueError("handover_n must be an integer greater than 1")
        Hybrid2Mode(self.hybrid2_mode)
        ExpectationMethod(self.expectation)
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")

    @property
    def thetas(self) -> Tuple[float, ...]:
        return self.theta


def default_theta_sweep() -> Tuple[float, ...]:
    """Log-spaced θ grid used when a theta sweep lists no values"""
    lo, hi = THETA_SWEEP_DECADES
    step = (hi - lo) / (THETA_SWEEP_POINTS - 1)
    return tuple(10.0 ** (lo + k * step) for k in range(THETA_SWEEP_POINTS))


@dataclass(frozen=True)
class SweepSpec:
    axis: Optional[str] = None
    values: Tuple[Any, ...] = ()

    def __post_init__(self):
        if self.axis is None:
            if self.values:
                raise ValueError("values given without an axis")
            return
        axis = SweepAxis(self.axis)
        if axis is SweepAxis.THETA and not self.values:
            object.__setattr__(self, "values", default_theta_sweep())
        values = tuple(tuple(float(c) for c in v) if isinstance(v, (list, tuple)) else float(v)
                       for v in self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise ValueError("a sweep needs at least one value")
        if axis is SweepAxis.POSITION_XY:
            if any(not isinstance(v, tuple) or len(v) != 2 for v in values):
                raise ValueError("position_xy values must be [x, y] pairs")
            if len(set(values)) != len(values):
                raise ValueError("position_xy values must be distinct")
            return
        if any(isinstance(v, tuple) for v in values):
            raise ValueError(f"{axis.value} values must be numbers")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if axis in (SweepAxis.N, SweepAxis.USERS) and any(int(v) != v or v < 1 for v in values):
            raise ValueError(f"{axis.value} values must be positive integers")

    @property
    def sweep_axis(self) -> Optional[SweepAxis]:
        return SweepAxis(self.axis) if self.axis is not None else None


@dataclass(frozen=True)
class SimulationSpec:
    frames: int = 1_000_000
    seeds: Union[int, Tuple[int, ...]] = 20
    warmup: int = 10_000
    thresholds: Tuple[float, ...] = ()

    def __post_init__(self):
        if isinstance(self.seeds, (list, tuple)):
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
            if not self.seeds:
                raise ValueError("seeds must not be empty")
        elif int(self.seeds) != self.seeds or self.seeds < 1:
            raise ValueError("seeds must be a positive count or a list")
        object.__setattr__(self, "thresholds", tuple(float(q) for q in self.thresholds))
        if self.frames < 1 or not 0 <= self.warmup < self.frames:
            raise ValueError("need frames >= 1 and 0 <= warmup < frames")

    def seed_list(self, base_seed: int) -> Tuple[int, ...]:
        if isinstance(self.seeds, tuple):
            return self.seeds
        return tuple(base_seed + i for i in range(int(self.seeds)))


@dataclass(frozen=True)
class ValidationSpec:
    tail_thetas: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tail_thetas", tuple(float(t) for t in self.tail_thetas))
        if any(t <= 0 for t in self.tail_thetas):
            raise ValueError("tail_thetas must be positive")


@dataclass(frozen=True)
class MultipleAccessSpec:
    """Equal per-user shares: FDMA splits bandwidth and power, TDMA splits the frame"""
    scheme: str = AccessScheme.FDMA.value
    users: int = 1

    def __post_init__(self):
        AccessScheme(self.scheme)
        if int(self.users) != self.users or self.users < 1:
            raise ValueError("users must be a positive integer")


@dataclass(frozen=True)
class Scenario:
    source: SourceSpec
    name: str = "scenario"
    seed: int = 0
    rf: RfChannelSpec = field(default_factory=RfChannelSpec)
    vlc: VlcChannelSpec = field(default_factory=VlcChannelSpec)
    budget: BudgetSpec = field(default_factory=BudgetSpec)
    frame: FrameBlock = field(default_factory=FrameBlock)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    strategies: Tuple[str, ...] = ("rf", "vlc", "hybrid1", "hybrid2")
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    validation: ValidationSpec = field(default_factory=ValidationSpec)
    multiple_access: MultipleAccessSpec = field(default_factory=MultipleAccessSpec)

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        for name in self.strategies:
            Strategy(name)

    @property
    def strategy_list(self) -> Tuple[Strategy, ...]:
        return tuple(Strategy(name) for name in self.strategies)

    def with_seed(self, seed: int) -> "Scenario":
        return dataclasses.replace(self, seed=int(seed))

    def frame_spec(self, users: Optional[int] = None) -> FrameSpec:
        users = users or self.multiple_access.users
        rf_bw, vlc_bw, share = self.rf.bandwidth_hz, self.vlc.bandwidth_hz, 1.0
        if AccessScheme(self.multiple_access.scheme) is AccessScheme.FDMA:
            rf_bw, vlc_bw = rf_bw / users, vlc_bw / users
        else:
            share = 1.0 / users
        return FrameSpec(self.frame.frame_duration_s, rf_bw, vlc_bw, share)

    def link_model(self, avg_power_dbm: Optional[float] = None, ratio: Optional[float] = None,
                   rf: Optional[RfChannelSpec] = None, vlc: Optional[VlcChannelSpec] = None,
                   users: Optional[int] = None) -> LinkModel:
        """LinkModel for one sweep point; defaults come from the scenario"""
        users = users or self.multiple_access.users
        rf = rf or self.rf
        vlc = vlc or self.vlc
        budget = PowerBudget.from_dbm(
            self.budget.avg_power_dbm if avg_power_dbm is None else avg_power_dbm,
            self.budget.ratios[0] if ratio is None else ratio)
        if AccessScheme(self.multiple_access.scheme) is AccessScheme.FDMA and users > 1:
            budget = budget.scaled(1.0 / users)
            rf = dataclasses.replace(rf, bandwidth_hz=rf.bandwidth_hz / users)
            vlc = dataclasses.replace(vlc, bandwidth_hz=vlc.bandwidth_hz / users)
        return LinkModel(rf, vlc, budget, self.frame_spec(users), fading_seed=self.seed,
                         method=ExpectationMethod(self.analysis.expectation))

    def moved_to(self, rx_position_m: Sequence[float]) -> Tuple[RfChannelSpec, VlcChannelSpec]:
        """Channel specs with the receiver at a new position; both link distances follow"""
        vlc = self.vlc.with_receiver(rx_position_m)
        rf = dataclasses.replace(self.rf, distance_m=rf_distance_to(self.rf, rx_position_m))
        return rf, vlc


SECTIONS: Dict[str, Type] = {
    "rf": RfChannelSpec,
    "vlc": VlcChannelSpec,
    "budget": BudgetSpec,
    "source": SourceSpec,
    "frame": FrameBlock,
    "analysis": AnalysisSpec,
    "sweep": SweepSpec,
    "simulation": SimulationSpec,
    "validation": ValidationSpec,
    "multiple_access": MultipleAccessSpec,
}


def _required(cls: Type) -> Tuple[str, ...]:
    return tuple(f.name for f in dataclasses.fields(cls) if f.init
                 and f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING)


def _listify(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_listify(v) for v in value)
    return value


def build_section(cls: Type[T], data: Any, path: str) -> T:
    """Instantiate a dataclass from a mapping, rejecting unknown and missing keys"""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", path)
    known = {f.name for f in dataclasses.fields(cls) if f.init and not f.name.startswith("_")}
    for key in data:
        if key not in known:
            raise ConfigError("unknown key", f"{path}.{key}" if path else str(key))
    for key in _required(cls):
        if key not in data:
            raise ConfigError("missing required key", f"{path}.{key}" if path else key)
    try:
        return cls(**{key: _listify(value) for key, value in data.items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), path) from None


def scenario_from_dict(data: Any) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("a scenario must be a mapping at the top level")
    known = {f.name for f in dataclasses.fields(Scenario)}
    for key in data:
        if key not in known:
            raise ConfigError("unknown key", str(key))
    if "source" not in data:
        raise ConfigError("missing required key", "source")
    kwargs: Dict[str, Any] = {}
    for key, value in data.items():
        if key in SECTIONS:
            kwargs[key] = build_section(SECTIONS[key], value, key)
        elif key == "strategies":
            if not isinstance(value, list):
                raise ConfigError("expected a list of strategy names", key)
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    if not isinstance(kwargs.get("seed", 0), int):
        raise ConfigError("seed must be an integer", "seed")
    try:
        return Scenario(**kwargs)
    except ValueError as e:
        raise ConfigError(str(e), "strategies") from None


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read a scenario file; .json goes through json, anything else through yaml.safe_load

    YAML 1.1 reads exponents without a decimal point (1e-21) as strings, so
    resolved scenarios are always read back as JSON.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read scenario: {e}") from None
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {path.name}: {e}") from None
    scenario = scenario_from_dict(data)
    logger.debug("loaded scenario %s from %s", scenario.name, path)
    return scenario


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Fully resolved scenario, every default spelled out"""
    out: Dict[str, Any] = {"name": scenario.name, "seed": scenario.seed}
    for key in SECTIONS:
        section = getattr(scenario, key)
        out[key] = {f.name: _plain(getattr(section, f.name))
                    for f in dataclasses.fields(section) if f.init and not f.name.startswith("_")}
    out["strategies"] = list(scenario.strategies)
    if out["sweep"]["axis"] is None:
        out["sweep"] = {}
    return out


def write_resolved(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n", encoding="utf-8")
    return path

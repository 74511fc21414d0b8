"""
Non-asymptotic backlog and delay bounds

    q = inf_c {q_service(c) + q_arrival(c)}        d = inf_c {(q_service(c) + q_arrival(c)) / c}

with q_service = -sup_θ log(-ε_s[Λ(-θ) + θc])/θ and
q_arrival = -sup_θ log(ε_a[θc - sup_t Λ_a(θ, t)])/θ. Each inner sup is taken
over a log-spaced θ grid where the log argument is positive, then refined
locally around the best grid point. A log argument of 1 or more makes the
term zero.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .errors import AllInfeasibleError, EmptyDomainError
from .numerics import maximize_bounded
from .source import SourceSpec, sup_lmgf_arrival_finite
from .strategies import ServiceLmgf, Strategy

logger = logging.getLogger(__name__)

BOUNDED_STRATEGIES = (Strategy.RF, Strategy.VLC, Strategy.HYBRID1)
SPLIT_FRACTIONS = tuple(k / 10.0 for k in range(1, 10))
_INFEASIBLE = 1e300


class BoundKind(Enum):
    BACKLOG = "backlog"
    DELAY = "delay"


@dataclass(frozen=True)
class BoundQuery:
    """Free-parameter search settings for one bound

    Grids are relative to the mean service rate: θ spans
    theta_span / mean and c spans c_span × mean.
    """
    epsilon: float = 1e-3
    service_share: float = 0.5
    theta_points: int = 400
    theta_span: Tuple[float, float] = (1e-3, 1e4)
    c_points: int = 64
    c_span: Tuple[float, float] = (0.1, 10.0)
    t_max: int = 200
    optimize_split: bool = False

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.service_share < 1.0:
            raise ValueError("service_share must lie in (0, 1)")
        if self.theta_points < 2 or self.c_points < 2:
            raise ValueError("theta and c grids need at least two points")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")

    @property
    def epsilon_service(self) -> float:
        return self.epsilon * self.service_share

    @property
    def epsilon_arrival(self) -> float:
        return self.epsilon * (1.0 - self.service_share)

    def with_share(self, share: float) -> "BoundQuery":
        return BoundQuery(self.epsilon, share, self.theta_points, self.theta_span, self.c_points,
                          self.c_span, self.t_max, False)


@dataclass
class BoundResult:
    q_bits: float
    d_frames: float
    c_bits_per_frame: float
    q_service_bits: float
    q_arrival_bits: float
    theta_service: Optional[float]
    theta_arrival: Optional[float]
    epsilon_service: float
    epsilon_arrival: float
    notes: List[str] = field(default_factory=list)

    def d_ms(self, frame_duration_s: float) -> float:
        return self.d_frames * frame_duration_s * 1e3


def theta_grid(mean_service: float, points: int = 400,
               span: Tuple[float, float] = (1e-3, 1e4)) -> np.ndarray:
    scale = max(mean_service, 1e-12)
    return np.geomspace(span[0] / scale, span[1] / scale, points)


def _sup_of_log_ratio(log_argument: np.ndarray, thetas: np.ndarray, term: str,
                      c: float) -> Tuple[float, float]:
    """(sup over admissible θ of log(arg)/θ, maximiser)"""
    admissible = np.isfinite(log_argument)
    if not np.any(admissible):
        raise EmptyDomainError(term, c)
    values = log_argument[admissible] / thetas[admissible]
    best = int(np.argmax(values))
    return float(values[best]), float(thetas[admissible][best])


def _log_positive(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(values > 0.0, np.log(np.where(values > 0.0, values, 1.0)), -np.inf)


def _log_unit(values: np.ndarray) -> np.ndarray:
    """log of values in (0, 1]; -inf marks θ outside the domain"""
    inside = (values > 0.0) & (values <= 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(inside, np.log(np.where(inside, values, 1.0)), -np.inf)


def _refine(objective, thetas: np.ndarray, theta_best: float, sup: float) -> Tuple[float, float]:
    """Local bounded search around a grid maximiser; keeps the grid value if it is better"""
    index = int(np.searchsorted(thetas, theta_best))
    lo = thetas[max(index - 1, 0)]
    hi = thetas[min(index + 1, thetas.size - 1)]
    if hi <= lo:
        return sup, theta_best
    theta, value = maximize_bounded(objective, lo, hi)
    if value > sup:
        return value, theta
    return sup, theta_best


def _service_values(service: ServiceLmgf, thetas: np.ndarray) -> np.ndarray:
    return np.array([service.lmgf(-t) for t in thetas])


def backlog_service_term(service: ServiceLmgf, epsilon_service: float, c: float,
                         thetas: np.ndarray, service_values: Optional[np.ndarray] = None,
                         refine: bool = False) -> Tuple[float, Optional[float]]:
    """(q_service, maximising θ); a constant-rate service gives 0 for every c up to its rate

    Only θ with -ε(Λ(-θ) + θc) in (0, 1] take part, so the term is never negative.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    rate = service.deterministic_rate
    if rate is not None:
        if c <= rate:
            return 0.0, None
        raise EmptyDomainError("service", c)
    if service_values is None:
        service_values = _service_values(service, thetas)
    log_argument = _log_unit(-epsilon_service * (service_values + thetas * c))
    sup, theta = _sup_of_log_ratio(log_argument, thetas, "service", c)
    if refine:
        def objective(t: float) -> float:
            argument = -epsilon_service * (service.lmgf(-t) + t * c)
            return math.log(argument) / t if 0 < argument <= 1 else -_INFEASIBLE
        sup, theta = _refine(objective, thetas, theta, sup)
    return max(0.0, -sup), theta


def backlog_arrival_term(source: SourceSpec, epsilon_arrival: float, c: float,
                         thetas: np.ndarray, t_max: int = 200,
                         arrival_values: Optional[np.ndarray] = None,
                         refine: bool = False) -> Tuple[float, Optional[float]]:
    """(q_arrival, maximising θ) with the inner sup over t from the finite-horizon log-MGF"""
    if c <= 0:
        raise ValueError("c must be positive")
    if source.lambda_bits_per_frame == 0.0:
        return 0.0, None
    if arrival_values is None:
        arrival_values = np.asarray(sup_lmgf_arrival_finite(source, thetas, t_max))
    log_argument = math.log(epsilon_arrival) + _log_positive(thetas * c - arrival_values)
    sup, theta = _sup_of_log_ratio(log_argument, thetas, "arrival", c)
    if refine:
        def objective(t: float) -> float:
            argument = epsilon_arrival * (t * c - sup_lmgf_arrival_finite(source, t, t_max))
            return math.log(argument) / t if argument > 0 else -_INFEASIBLE
        sup, theta = _refine(objective, thetas, theta, sup)
    return max(0.0, -sup), theta


class BoundSearch:
    """Outer search over c for one (service, source, query), with the θ-grid terms precomputed"""

    def __init__(self, service: ServiceLmgf, source: SourceSpec, query: BoundQuery):
        if service.strategy not in BOUNDED_STRATEGIES:
            raise ValueError(f"non-asymptotic bounds are available for rf, vlc and hybrid1, "
                             f"not {service.strategy.value}")
        self.service = service
        self.source = source
        self.query = query
        self.mean_service = service.mean_rate()
        self.thetas = theta_grid(self.mean_service, query.theta_points, query.theta_span)
        self.service_values = (None if service.deterministic_rate is not None
                               else _service_values(service, self.thetas))
        self.arrival_values = np.asarray(
            sup_lmgf_arrival_finite(source, self.thetas, query.t_max))

    def terms(self, c: float, query: BoundQuery, refine: bool = False):
        q_s, theta_s = backlog_service_term(self.service, query.epsilon_service, c, self.thetas,
                                            self.service_values, refine)
        q_a, theta_a = backlog_arrival_term(self.source, query.epsilon_arrival, c, self.thetas,
                                            query.t_max, self.arrival_values, refine)
        return q_s, theta_s, q_a, theta_a

    def _objective(self, c: float, query: BoundQuery, kind: BoundKind) -> float:
        try:
            q_s, _, q_a, _ = self.terms(c, query)
        except EmptyDomainError:
            return _INFEASIBLE
        total = q_s + q_a
        return total if kind is BoundKind.BACKLOG else total / c

    def _result(self, c: float, query: BoundQuery, notes: List[str]) -> BoundResult:
        q_s, theta_s, q_a, theta_a = self.terms(c, query, refine=True)
        q = q_s + q_a
        return BoundResult(q, q / c, c, q_s, q_a, theta_s, theta_a, query.epsilon_service,
                           query.epsilon_arrival, notes)

    def search(self, query: BoundQuery, kind: BoundKind) -> BoundResult:
        rate = self.service.deterministic_rate
        if rate is not None:
            if rate <= 0.0:
                raise AllInfeasibleError(self.service.name)
            # a constant-rate service forces c = V and q = q_a
            try:
                return self._result(rate, query, ["constant-rate service: c = V"])
            except EmptyDomainError:
                raise AllInfeasibleError(self.service.name) from None
        grid = self.mean_service * np.geomspace(query.c_span[0], query.c_span[1], query.c_points)
        values = np.array([self._objective(c, query, kind) for c in grid])
        if np.all(values >= _INFEASIBLE):
            raise AllInfeasibleError(self.service.name)
        index = int(np.argmin(values))
        c_best = float(grid[index])
        lo, hi = grid[max(index - 1, 0)], grid[min(index + 1, grid.size - 1)]
        c_refined, negated = maximize_bounded(lambda c: -self._objective(c, query, kind), lo, hi)
        if -negated < values[index]:
            c_best = c_refined
        return self._result(c_best, query, [])

    def bound(self, kind: BoundKind) -> BoundResult:
        if not self.query.optimize_split:
            return self.search(self.query, kind)
        best: Optional[BoundResult] = None
        for share in SPLIT_FRACTIONS:
            try:
                result = self.search(self.query.with_share(share), kind)
            except AllInfeasibleError:
                continue
            value = result.q_bits if kind is BoundKind.BACKLOG else result.d_frames
            current = None if best is None else (best.q_bits if kind is BoundKind.BACKLOG
                                                 else best.d_frames)
            if current is None or value < current:
                best = result
        if best is None:
            raise AllInfeasibleError(self.service.name)
        best.notes.append(f"epsilon split optimised: service share "
                          f"{best.epsilon_service / self.query.epsilon:.1f}")
        return best


def backlog_bound(service: ServiceLmgf, source: SourceSpec,
                  query: Optional[BoundQuery] = None) -> BoundResult:
    """Backlog bound q with Pr{Q > q} <= ε"""
    return BoundSearch(service, source, query or BoundQuery()).bound(BoundKind.BACKLOG)


def delay_bound(service: ServiceLmgf, source: SourceSpec,
                query: Optional[BoundQuery] = None) -> BoundResult:
    """FCFS delay bound d in frames with Pr{delay > d} <= ε"""
    return BoundSearch(service, source, query or BoundQuery()).bound(BoundKind.DELAY)

"""
ON-OFF Markov arrival process - steady state, asymptotic and finite-horizon
log-MGFs, and sample paths for the simulator
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

FINITE_HORIZON_CAP = 10_000
FINITE_HORIZON_TOL = 1e-6


@dataclass(frozen=True)
class SourceSpec:
    """ON->OFF probability alpha, OFF->ON probability beta, lambda bits per ON frame"""
    alpha: float
    beta: float
    lambda_bits_per_frame: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.alpha + self.beta <= 0.0:
            raise ValueError("alpha + beta must be positive")
        if self.lambda_bits_per_frame < 0:
            raise ValueError("lambda_bits_per_frame must be nonnegative")

    @property
    def p_on(self) -> float:
        return self.beta / (self.alpha + self.beta)

    @property
    def p_off(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def mean_rate(self) -> float:
        return self.p_on * self.lambda_bits_per_frame

    @property
    def transition_matrix(self) -> np.ndarray:
        """J with rows (ON, OFF) -> columns (ON, OFF)"""
        return np.array([[1.0 - self.alpha, self.alpha],
                         [self.beta, 1.0 - self.beta]])

    def with_rate(self, lambda_bits_per_frame: float) -> "SourceSpec":
        return SourceSpec(self.alpha, self.beta, lambda_bits_per_frame)


def log_perron_root(alpha: float, beta: float, z: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """log of the Perron root of diag(e^z, 1)·J, i.e. the ON-OFF log-MGF at θλ = z

    Written as (1-β-(1-α)E)² + 4αβE under the root so the discriminant never goes
    negative through rounding, and factored by e^z for positive z.
    """
    z = np.asarray(z, dtype=float)
    positive = z > 0
    # e_small = e^{-|z|}; for z > 0 the matrix is divided through by e^z
    e_small = np.exp(np.where(positive, -z, z))
    on = np.where(positive, 1.0 - alpha, (1.0 - alpha) * e_small)
    off = np.where(positive, (1.0 - beta) * e_small, 1.0 - beta)
    cross = 4.0 * alpha * beta * e_small
    root = 0.5 * (on + off + np.sqrt((off - on) ** 2 + cross))
    with np.errstate(divide="ignore"):
        result = np.where(positive, z, 0.0) + np.log(root)
    return float(result) if result.ndim == 0 else result


def lmgf_arrival_asymptotic(spec: SourceSpec, theta: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Λ_a(θ) of the ON-OFF source"""
    return log_perron_root(spec.alpha, spec.beta, np.asarray(theta) * spec.lambda_bits_per_frame)


def _scaled_power(matrix: np.ndarray, power: int) -> Tuple[np.ndarray, float]:
    """matrix**power as (mantissa, log_scale) by repeated squaring with renormalisation"""
    result = np.eye(matrix.shape[0])
    log_scale = 0.0
    base = matrix.copy()
    base_scale = 0.0
    while power:
        if power & 1:
            result = result @ base
            log_scale += base_scale
            peak = np.abs(result).max()
            result /= peak
            log_scale += math.log(peak)
        power >>= 1
        if power:
            base = base @ base
            base_scale *= 2.0
            peak = np.abs(base).max()
            base /= peak
            base_scale += math.log(peak)
    return result, log_scale


def _scaled_phi(spec: SourceSpec, theta: float) -> Tuple[np.ndarray, float]:
    """diag(e^{θλ}, 1) as e^{shift}·weights with weights at most 1"""
    z = theta * spec.lambda_bits_per_frame
    shift = max(z, 0.0)
    return np.array([math.exp(z - shift), math.exp(-shift)]), shift


def lmgf_arrival_finite(spec: SourceSpec, theta: float, t: int) -> float:
    """Λ_a(θ, t) = (1/t) log [p_ON p_OFF] (diag(e^{θλ},1) J)^{t-1} diag(e^{θλ},1) [1; 1]"""
    if t < 1:
        raise ValueError("t must be a positive integer")
    weights, shift = _scaled_phi(spec, theta)
    power, log_scale = _scaled_power(weights[:, None] * spec.transition_matrix, t - 1)
    initial = np.array([spec.p_on, spec.p_off])
    value = float(initial @ power @ weights)
    return (math.log(value) + log_scale + t * shift) / t


def lmgf_arrival_finite_sequence(spec: SourceSpec, theta: Union[float, np.ndarray],
                                 t_max: int) -> np.ndarray:
    """Λ_a(θ, t) for t = 1..t_max, shape (t_max,) or (t_max, len(theta))"""
    thetas = np.atleast_1d(np.asarray(theta, dtype=float))
    z = thetas * spec.lambda_bits_per_frame
    shift = np.maximum(z, 0.0)
    phi = np.vstack([np.exp(z - shift), np.exp(-shift)])
    step = spec.transition_matrix
    # w_t = Φ (J Φ)^{t-1} [1; 1] built right to left, so π·w_t is the t-frame MGF
    vector = phi.copy()
    log_scale = shift.copy()
    initial = np.array([spec.p_on, spec.p_off])
    out = np.empty((t_max, thetas.size))
    for t in range(1, t_max + 1):
        out[t - 1] = (np.log(initial @ vector) + log_scale) / t
        vector = phi * (step @ vector)
        peak = vector.max(axis=0)
        vector = vector / peak
        log_scale = log_scale + shift + np.log(peak)
    return out[:, 0] if np.ndim(theta) == 0 else out


def sup_lmgf_arrival_finite(spec: SourceSpec, theta: Union[float, np.ndarray],
                            t_max: int = 200, cap: int = FINITE_HORIZON_CAP,
                            tol: float = FINITE_HORIZON_TOL) -> Union[float, np.ndarray]:
    """sup over t >= 1 of Λ_a(θ, t)

    Evaluates t = 1..t_max, then keeps extending the horizon until successive
    values move less than tol for every θ, up to cap.
    """
    thetas = np.atleast_1d(np.asarray(theta, dtype=float))
    horizon = min(t_max, cap)
    while True:
        values = lmgf_arrival_finite_sequence(spec, thetas, horizon)
        if horizon < 2:
            settled = True
        else:
            settled = bool(np.all(np.abs(values[-1] - values[-2]) < tol))
        if settled or horizon >= cap:
            break
        horizon = min(2 * horizon, cap)
    if not settled:
        logger.warning("finite-horizon log-MGF not settled at t=%d (cap)", horizon)
    best = values.max(axis=0)
    return float(best[0]) if np.ndim(theta) == 0 else best


@dataclass(frozen=True)
class ArrivalTrace:
    per_frame_arrivals: np.ndarray
    state_sequence: np.ndarray
    seed: Optional[int]

    @property
    def on_fraction(self) -> float:
        return float(np.mean(self.state_sequence))


class OnOffGenerator:
    """Continuation-friendly sample-path generator for the ON-OFF chain

    Sojourns are geometric; they are drawn in batches and the unfinished part
    of the last sojourn carries over to the next call.
    """

    def __init__(self, spec: SourceSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.state_on = bool(rng.random() < spec.p_on)
        self._remaining = 0

    def _leave(self, state_on: bool) -> float:
        return self.spec.alpha if state_on else self.spec.beta

    def _flip(self) -> None:
        if self._leave(self.state_on) > 0.0:
            self.state_on = not self.state_on

    def states(self, count: int) -> np.ndarray:
        """Next `count` states (True = ON)"""
        out = np.empty(count, dtype=bool)
        filled = min(self._remaining, count)
        out[:filled] = self.state_on
        self._remaining -= filled
        if filled and self._remaining == 0:
            self._flip()
        while filled < count:
            need = count - filled
            current, other = self.state_on, not self.state_on
            if self._leave(current) == 0.0:
                out[filled:] = current
                return out
            if self._leave(other) == 0.0:
                run = int(self.rng.geometric(self._leave(current)))
                take = min(run, need)
                out[filled:filled + take] = current
                filled += take
                if run > need:
                    self._remaining = run - need
                else:
                    self.state_on = other
                continue
            cycle = 1.0 / self._leave(current) + 1.0 / self._leave(other)
            batch = int(need / cycle) + 8
            runs = np.empty(2 * batch, dtype=np.int64)
            runs[0::2] = self.rng.geometric(self._leave(current), size=batch)
            runs[1::2] = self.rng.geometric(self._leave(other), size=batch)
            labels = np.empty(2 * batch, dtype=bool)
            labels[0::2] = current
            labels[1::2] = other
            ends = np.cumsum(runs)
            if ends[-1] < need:
                out[filled:filled + ends[-1]] = np.repeat(labels, runs)
                filled += int(ends[-1])
                continue
            last = int(np.searchsorted(ends, need))
            out[filled:] = np.repeat(labels[:last + 1], runs[:last + 1])[:need]
            filled = count
            self._remaining = int(ends[last] - need)
            self.state_on = bool(labels[last])
            if self._remaining == 0:
                self._flip()
        return out


def generate_arrivals(spec: SourceSpec, frames: int, seed: int) -> ArrivalTrace:
    """Markov-consistent ON-OFF trace; the first state is drawn from the steady state"""
    if frames < 1:
        raise ValueError("frames must be at least 1")
    generator = OnOffGenerator(spec, np.random.default_rng(seed))
    states = generator.states(frames)
    arrivals = np.where(states, spec.lambda_bits_per_frame, 0.0)
    return ArrivalTrace(arrivals, states, seed)

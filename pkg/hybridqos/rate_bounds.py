"""
Per-frame reliable rates - the RF lower bound R_l with its truncated-Gaussian
constants (a, b) and the constant VLC rate V with its constant μ*

All rates are bits per frame. The RF bound is evaluated in log space so that
extreme (a, b) pairs near a unit average-to-peak ratio stay finite.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from .errors import NoBracketError, OutOfRegimeError
from .numerics import bisect_root

ArrayLike = Union[float, np.ndarray]

LN2 = math.log(2.0)
# dimensionless x = b·P_peak; the ratio equation tends to 1 only as x -> -inf and to 0 as x -> +inf
X_LOWER = -1e10
X_UPPER = 1e10
RESIDUAL_TOL = 1e-9
MU_LOWER = 1e-9
MU_UPPER = 700.0
MU_UPPER_EXTENDED = 1e12
_SERIES_LIMIT = 1e-3
_EXPM1_LIMIT = 30.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class PowerBudget:
    """Average power P_avg and average-to-peak ratio ν shared by both links"""
    avg_power_w: float
    avg_to_peak_ratio: float

    def __post_init__(self):
        if self.avg_power_w <= 0:
            raise ValueError("avg_power_w must be positive")
        if not 0.0 < self.avg_to_peak_ratio <= 1.0:
            raise ValueError("avg_to_peak_ratio must lie in (0, 1]")

    @classmethod
    def from_dbm(cls, avg_power_dbm: float, avg_to_peak_ratio: float) -> "PowerBudget":
        return cls(dbm_to_watts(avg_power_dbm), avg_to_peak_ratio)

    @property
    def peak_power_w(self) -> float:
        """P_peak,r = P_peak,v = P_avg / ν"""
        return self.avg_power_w / self.avg_to_peak_ratio

    def split(self, gamma: float) -> Tuple[float, float]:
        """(P_avg,r, P_avg,v) when a fraction gamma of the average power goes to RF"""
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        return gamma * self.avg_power_w, (1.0 - gamma) * self.avg_power_w

    def scaled(self, factor: float) -> "PowerBudget":
        return PowerBudget(self.avg_power_w * factor, self.avg_to_peak_ratio)


@dataclass(frozen=True)
class FrameSpec:
    """Frame of T seconds; time_share < 1 models a TDMA slot of the frame"""
    frame_duration_s: float = 1e-4
    rf_bandwidth_hz: float = 10e6
    vlc_bandwidth_hz: float = 10e6
    time_share: float = 1.0

    def __post_init__(self):
        if self.frame_duration_s <= 0:
            raise ValueError("frame_duration_s must be positive")
        if not 0.0 < self.time_share <= 1.0:
            raise ValueError("time_share must lie in (0, 1]")
        if self.symbols_per_frame_rf < 1 or self.symbols_per_frame_vlc < 1:
            raise ValueError("a frame must carry at least one symbol on each link")

    @property
    def symbols_per_frame_rf(self) -> float:
        return self.frame_duration_s * self.rf_bandwidth_hz * self.time_share

    @property
    def symbols_per_frame_vlc(self) -> float:
        return self.frame_duration_s * self.vlc_bandwidth_hz * self.time_share

    def to_ms(self, frames: float) -> float:
        return frames * self.frame_duration_s * 1e3

    def to_kbps(self, bits_per_frame: float) -> float:
        return bits_per_frame / self.frame_duration_s / 1e3


@dataclass(frozen=True)
class TruncatedGaussianConstants:
    a: float
    b: float
    log_a: float
    residual_a: float
    residual_b: float
    avg_to_peak_ratio: float


def _ratio_equation(x: float) -> float:
    """Right side of the average-to-peak equation after eliminating a, as a function of x = b·P_peak

    Decreasing from 1 (x -> -inf) through 1/2 (x = 0) to 0 (x -> +inf).
    """
    if abs(x) < _SERIES_LIMIT:
        return 0.5 - x / 24.0
    if x > 0:
        u = 0.5 * x
        one_minus = -math.expm1(-u)
        return (one_minus - u * math.exp(-u)) / (u * one_minus)
    v = -0.5 * x
    one_minus = -math.expm1(-v)
    return 2.0 * (v + math.expm1(-v)) / (-x * one_minus)


def _log_abs_one_minus_exp_neg(z: float) -> float:
    """log|1 - e^{-z}| without overflow for very negative z"""
    if z > 0:
        return math.log(-math.expm1(-z))
    w = -z
    return w + math.log(-math.expm1(-w))


def solve_ab(p_avg: float, p_peak: float) -> TruncatedGaussianConstants:
    """Constants (a, b) of the truncated-Gaussian input for an average/peak power pair

    a is eliminated through (a/b)(1 - e^{-bP_peak/2}) = 1 and the remaining ratio
    equation is bisected in b, which may take either sign.
    """
    if not 0.0 < p_avg <= p_peak:
        raise ValueError("require 0 < p_avg <= p_peak")
    ratio = p_avg / p_peak
    lower_value = _ratio_equation(X_LOWER)
    if ratio >= lower_value:
        # unit ratio: the root sits at x -> -inf, the bracket edge already meets the tolerance
        if ratio - lower_value > RESIDUAL_TOL:
            raise NoBracketError("the average-to-peak equation", X_LOWER / p_peak, X_UPPER / p_peak)
        x = X_LOWER
    else:
        x = bisect_root(lambda t: _ratio_equation(t) - ratio, X_LOWER, X_UPPER,
                        "the average-to-peak equation")
    b = x / p_peak
    if x == 0.0:
        log_a = math.log(2.0 / p_peak)
        residual_a = math.exp(log_a) * p_peak / 2.0 - 1.0
    else:
        log_abs_one_minus = _log_abs_one_minus_exp_neg(0.5 * x)
        log_a = math.log(abs(b)) - log_abs_one_minus
        residual_a = math.expm1(log_a - math.log(abs(b)) + log_abs_one_minus)
    return TruncatedGaussianConstants(
        a=math.exp(log_a),
        b=b,
        log_a=log_a,
        residual_a=residual_a,
        residual_b=_ratio_equation(x) - ratio,
        avg_to_peak_ratio=ratio,
    )


def _log_expm1(x: float) -> float:
    """log(e^x - 1) without overflow for large x"""
    if x > _EXPM1_LIMIT:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


@dataclass(frozen=True)
class RfRateModel:
    """R_l as a function of |h_l|² for fixed constants, frame and RF power"""
    constants: TruncatedGaussianConstants
    frame: FrameSpec
    p_avg_r: float
    sigma_r2: float

    @classmethod
    def build(cls, p_avg_r: float, p_peak_r: float, sigma_r2: float,
              frame: FrameSpec) -> "RfRateModel":
        return cls(solve_ab(p_avg_r, p_peak_r), frame, p_avg_r, sigma_r2)

    @property
    def log_snr_coefficient(self) -> float:
        """log of 2·exp(b·P_avg,r/2 - 1)/(a·σ_r²), the factor multiplying |h|²"""
        return (LN2 - self.constants.log_a - math.log(self.sigma_r2)
                + 0.5 * self.constants.b * self.p_avg_r - 1.0)

    def rate(self, h2: ArrayLike) -> ArrayLike:
        h2 = np.asarray(h2, dtype=float)
        with np.errstate(divide="ignore"):
            exponent = self.log_snr_coefficient + np.log(h2)
        bits = self.frame.symbols_per_frame_rf * np.logaddexp(0.0, exponent) / LN2
        return float(bits) if bits.ndim == 0 else bits

    def threshold(self, rate_bits: float) -> float:
        """|h|² at which R_l equals rate_bits"""
        if rate_bits <= 0:
            return 0.0
        log_excess = _log_expm1(rate_bits * LN2 / self.frame.symbols_per_frame_rf)
        try:
            return math.exp(log_excess - self.log_snr_coefficient)
        except OverflowError:
            return math.inf


def rf_rate(h2: ArrayLike, constants: TruncatedGaussianConstants, frame: FrameSpec,
            p_avg_r: float, sigma_r2: float) -> ArrayLike:
    return RfRateModel(constants, frame, p_avg_r, sigma_r2).rate(h2)


class VlcRegime(Enum):
    LOW_RATIO = "low-ratio"
    HIGH_RATIO = "high-ratio"


@dataclass(frozen=True)
class VlcRateConstants:
    mu_star: Optional[float]
    regime: VlcRegime
    bits_per_frame: float
    mu_residual: float = 0.0


def _mu_ratio(mu: float) -> float:
    """1/μ - e^{-μ}/(1 - e^{-μ}); strictly decreasing from 1/2 to 0"""
    if mu < _SERIES_LIMIT:
        return 0.5 - mu / 12.0 + mu ** 3 / 720.0
    if mu > MU_UPPER:
        tail = math.exp(-mu)
        return 1.0 / mu - tail / (1.0 - tail)
    return 1.0 / mu - 1.0 / math.expm1(mu)


def solve_mu_star(ratio: float) -> float:
    if not 0.0 < ratio < 0.5:
        raise OutOfRegimeError(ratio)
    upper = MU_UPPER if _mu_ratio(MU_UPPER) < ratio else MU_UPPER_EXTENDED
    return bisect_root(lambda mu: _mu_ratio(mu) - ratio, MU_LOWER, upper, "the mu* equation")


def vlc_rate(gain: float, responsivity: float, sigma_v2: float, frame: FrameSpec,
             p_avg_v: float, p_peak_v: float) -> VlcRateConstants:
    """Constant VLC rate V; the low-ratio branch applies when P_avg,v/P_peak,v < 1/2"""
    if gain < 0:
        raise ValueError("gain must be nonnegative")
    ratio = p_avg_v / p_peak_v
    if ratio >= 0.5:
        regime, mu_star, residual = VlcRegime.HIGH_RATIO, None, 0.0
        log_factor = -1.0
    elif ratio <= 0.0:
        return VlcRateConstants(None, VlcRegime.LOW_RATIO, 0.0)
    else:
        regime = VlcRegime.LOW_RATIO
        mu_star = solve_mu_star(ratio)
        residual = _mu_ratio(mu_star) - ratio
        log_factor = (2.0 * ratio * mu_star - 1.0
                      + 2.0 * math.log(-math.expm1(-mu_star) / mu_star))
    if gain == 0.0:
        return VlcRateConstants(mu_star, regime, 0.0, residual)
    snr = (p_peak_v * responsivity * gain) ** 2 / (2.0 * math.pi * sigma_v2)
    bits = 0.5 * frame.symbols_per_frame_vlc * math.log1p(snr * math.exp(log_factor)) / LN2
    return VlcRateConstants(mu_star, regime, bits, residual)

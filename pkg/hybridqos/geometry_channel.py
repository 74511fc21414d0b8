"""
Physical-layer parameterization - VLC line-of-sight gain, RF large-scale path
loss, receiver noise powers and Rician fading samples

Angles are configured in degrees and converted to radians once, inside the
properties that need them. Positions are metres in a frame where the LED plane
faces down and the photo-diode faces up.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import constants, stats

Vector = Tuple[float, float, float]


class ShadowingMode(Enum):
    """How the large-scale shadowing term X_sigma enters the path loss"""
    FIXED_ZERO = "fixed-zero"
    DRAWN_ONCE = "drawn-once"


class DbConvention(Enum):
    """as-printed uses exp(-L/10) and a natural log; base10 the usual dB algebra"""
    AS_PRINTED = "as-printed"
    BASE10 = "base10"


def _as_vector(value: Sequence[float], name: str) -> Vector:
    vector = tuple(float(v) for v in value)
    if len(vector) != 3:
        raise ValueError(f"{name} must have three coordinates")
    return vector


@dataclass(frozen=True)
class VlcChannelSpec:
    """LED and photo-diode parameters of the VLC link"""
    half_intensity_angle_deg: float = 60.0
    field_of_view_deg: float = 90.0
    pd_area_m2: float = 1e-4
    concentrator_gain: float = 1.0
    bandwidth_hz: float = 10e6
    responsivity_a_per_w: float = 0.53
    noise_psd_a2_per_hz: float = 1e-21
    tx_position_m: Vector = (0.0, 0.0, 0.0)
    rx_position_m: Vector = (1.6, 0.0, -2.5)

    def __post_init__(self):
        object.__setattr__(self, "tx_position_m", _as_vector(self.tx_position_m, "tx_position_m"))
        object.__setattr__(self, "rx_position_m", _as_vector(self.rx_position_m, "rx_position_m"))
        if not 0.0 < self.half_intensity_angle_deg < 90.0:
            raise ValueError("half_intensity_angle_deg must lie in (0, 90)")
        if not 0.0 < self.field_of_view_deg <= 90.0:
            raise ValueError("field_of_view_deg must lie in (0, 90]")
        if self.pd_area_m2 <= 0 or self.bandwidth_hz <= 0 or self.responsivity_a_per_w <= 0:
            raise ValueError("pd_area_m2, bandwidth_hz and responsivity_a_per_w must be positive")
        if self.concentrator_gain < 0 or self.noise_psd_a2_per_hz <= 0:
            raise ValueError("concentrator_gain must be >= 0 and noise_psd_a2_per_hz > 0")
        if self.vertical_distance_m <= 0:
            raise ValueError("receiver must sit below the LED plane (vertical distance > 0)")

    @property
    def vertical_distance_m(self) -> float:
        return self.tx_position_m[2] - self.rx_position_m[2]

    @property
    def horizontal_offset_m(self) -> float:
        return math.hypot(self.rx_position_m[0] - self.tx_position_m[0],
                          self.rx_position_m[1] - self.tx_position_m[1])

    @property
    def distance_m(self) -> float:
        """Euclidean LED to photo-diode distance d_1"""
        return math.dist(self.tx_position_m, self.rx_position_m)

    @property
    def lambertian_index(self) -> float:
        return -1.0 / math.log2(math.cos(math.radians(self.half_intensity_angle_deg)))

    @property
    def incidence_angle_rad(self) -> float:
        return math.acos(min(1.0, self.vertical_distance_m / self.distance_m))

    def with_receiver(self, rx_position_m: Sequence[float]) -> "VlcChannelSpec":
        return replace(self, rx_position_m=tuple(rx_position_m))


@dataclass(frozen=True)
class RfChannelSpec:
    """Path loss, Rician fading and thermal noise parameters of the RF link"""
    bandwidth_hz: float = 10e6
    rician_factor_db: float = 10.0
    path_loss_exponent: float = 1.8
    shadowing_std_db: float = 3.6
    reference_loss_db: float = 40.0
    reference_distance_m: float = 1.0
    ambient_temp_k: float = 280.0
    distance_m: float = 15.0
    shadowing_mode: ShadowingMode = ShadowingMode.FIXED_ZERO
    shadowing_seed: int = 0
    db_convention: DbConvention = DbConvention.AS_PRINTED
    ap_position_m: Vector = (10.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "ap_position_m", _as_vector(self.ap_position_m, "ap_position_m"))
        # "inf" is accepted for a pure line-of-sight channel
        object.__setattr__(self, "rician_factor_db", float(self.rician_factor_db))
        object.__setattr__(self, "shadowing_mode", ShadowingMode(self.shadowing_mode))
        object.__setattr__(self, "db_convention", DbConvention(self.db_convention))
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")
        if self.shadowing_std_db < 0 or self.ambient_temp_k <= 0:
            raise ValueError("shadowing_std_db must be >= 0 and ambient_temp_k > 0")
        if self.reference_distance_m <= 0 or self.distance_m < self.reference_distance_m:
            raise ValueError("distance_m must be at least reference_distance_m")

    @property
    def rician_factor_linear(self) -> float:
        return 10.0 ** (self.rician_factor_db / 10.0)


def vlc_gain(spec: VlcChannelSpec) -> float:
    """Line-of-sight optical gain g of a Lambertian LED; zero outside the field of view"""
    d1 = spec.distance_m
    if d1 <= 0:
        raise ValueError("LED and photo-diode positions coincide")
    if spec.incidence_angle_rad > math.radians(spec.field_of_view_deg):
        return 0.0
    s = spec.lambertian_index
    return ((s + 1.0) * spec.pd_area_m2 * spec.concentrator_gain
            * spec.vertical_distance_m ** (s + 1.0) / (2.0 * math.pi * d1 ** (s + 3.0)))


def cell_radius(spec: VlcChannelSpec) -> float:
    """Radius of the illuminated cell on the receiver plane, d_v·tan(φ_1/2)"""
    return spec.vertical_distance_m * math.tan(math.radians(spec.half_intensity_angle_deg))


def cell_edge_position(spec: VlcChannelSpec) -> Vector:
    x, y, z = spec.tx_position_m
    return (x + cell_radius(spec), y, z - spec.vertical_distance_m)


def rf_distance_to(rf: RfChannelSpec, point: Sequence[float]) -> float:
    """Distance from the RF access point to a receiver position, floored at d_ref"""
    return max(rf.reference_distance_m, math.dist(rf.ap_position_m, _as_vector(point, "point")))


def shadowing_draw(spec: RfChannelSpec) -> float:
    """The large-scale term X_sigma in dB; drawn once per scenario when enabled"""
    if spec.shadowing_mode is ShadowingMode.FIXED_ZERO or spec.shadowing_std_db == 0:
        return 0.0
    rng = np.random.default_rng(spec.shadowing_seed)
    return float(rng.normal(0.0, spec.shadowing_std_db))


def rf_path_loss(spec: RfChannelSpec) -> float:
    """Large-scale path loss in dB at distance d_0"""
    ratio = spec.distance_m / spec.reference_distance_m
    if spec.db_convention is DbConvention.AS_PRINTED:
        spread = math.log(ratio)
    else:
        spread = math.log10(ratio)
    return spec.reference_loss_db + 10.0 * spec.path_loss_exponent * spread + shadowing_draw(spec)


def linear_path_gain(spec: RfChannelSpec) -> float:
    """Average power gain E|h|² implied by the path loss"""
    loss_db = rf_path_loss(spec)
    if spec.db_convention is DbConvention.AS_PRINTED:
        return math.exp(-loss_db / 10.0)
    return 10.0 ** (-loss_db / 10.0)


def noise_powers(rf: RfChannelSpec, vlc: VlcChannelSpec) -> Tuple[float, float]:
    """(σ_r² in W, σ_v² in A²): thermal RF noise and photo-diode noise"""
    sigma_r2 = constants.Boltzmann * rf.ambient_temp_k * rf.bandwidth_hz
    sigma_v2 = vlc.noise_psd_a2_per_hz * vlc.bandwidth_hz
    return sigma_r2, sigma_v2


@dataclass(frozen=True)
class FadingSampler:
    """Circularly symmetric complex Gaussian fading h ~ CN(mean, variance)

    The sampler is a value: every draw without an explicit generator restarts
    from `seed`, so copies handed to threads stay independent.
    """
    mean: complex
    variance: float
    seed: int = 0
    _distribution: Optional[object] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("fading variance must be nonnegative")
        if self.variance > 0:
            noncentrality = 2.0 * abs(self.mean) ** 2 / self.variance
            frozen = stats.ncx2(df=2, nc=noncentrality, scale=self.variance / 2.0)
            object.__setattr__(self, "_distribution", frozen)

    @classmethod
    def from_channel(cls, rf: RfChannelSpec, seed: int = 0) -> "FadingSampler":
        omega = linear_path_gain(rf)
        k = rf.rician_factor_linear
        if math.isinf(k):
            return cls(mean=complex(math.sqrt(omega), 0.0), variance=0.0, seed=seed)
        return cls(mean=complex(math.sqrt(omega * k / (k + 1.0)), 0.0),
                   variance=omega / (k + 1.0), seed=seed)

    @property
    def mean_power(self) -> float:
        return abs(self.mean) ** 2 + self.variance

    @property
    def deterministic(self) -> bool:
        return self.variance == 0.0

    @property
    def distribution(self):
        """Frozen scipy law of |h|² (noncentral χ² with two degrees of freedom)"""
        return self._distribution

    def cdf(self, h2: float) -> float:
        if self.deterministic:
            return 1.0 if h2 >= abs(self.mean) ** 2 else 0.0
        return float(self._distribution.cdf(h2))

    def sf(self, h2: float) -> float:
        if self.deterministic:
            return 0.0 if h2 >= abs(self.mean) ** 2 else 1.0
        return float(self._distribution.sf(h2))


def sample_fading_power(sampler: FadingSampler, count: int,
                        rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """i.i.d. |h|² draws; reproducible from sampler.seed unless a generator is passed"""
    if count < 1:
        raise ValueError("count must be at least 1")
    if rng is None:
        rng = np.random.default_rng(sampler.seed)
    if sampler.deterministic:
        return np.full(count, abs(sampler.mean) ** 2)
    scale = math.sqrt(sampler.variance / 2.0)
    h = sampler.mean + scale * (rng.standard_normal(count) + 1j * rng.standard_normal(count))
    return np.abs(h) ** 2

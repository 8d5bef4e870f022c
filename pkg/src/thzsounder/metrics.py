"""Channel characterization metrics from detected multipath profiles.

K-factor (dominant-path to residual power ratio), RMS delay spread and mean
delay, SNR / spectral efficiency / capacity under two noise models, and
empirical CDFs for report tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .receiver import MpcProfile

BOLTZMANN_J_K = 1.380649e-23


@dataclass(frozen=True)
class NoiseModel:
    """Receiver noise assumption: pure thermal or thermal plus a measured
    system noise floor (linear power sum)."""

    kind: str = "thermal"
    bandwidth_hz: float = 20e9
    temperature_k: float = 290.0
    system_noise_floor_dbm: float = -51.3

    def __post_init__(self):
        if self.kind not in ("thermal", "thermal_plus_system"):
            raise ValueError(f"unknown noise model kind {self.kind!r}")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.temperature_k <= 0:
            raise ValueError("temperature must be positive")

    def noise_power_dbm(self) -> float:
        thermal_w = BOLTZMANN_J_K * self.temperature_k * self.bandwidth_hz
        thermal_dbm = 10.0 * math.log10(thermal_w * 1e3)
        if self.kind == "thermal":
            return thermal_dbm
        total_mw = 10.0 ** (thermal_dbm / 10.0) \
            + 10.0 ** (self.system_noise_floor_dbm / 10.0)
        return 10.0 * math.log10(total_mw)


@dataclass(frozen=True)
class ChannelMetrics:
    """Per-frame channel characterization record."""

    received_power_dbm: float
    k_factor_db: float
    rms_delay_spread_ns: float
    mean_delay_ns: float
    snr_db: float
    spectral_efficiency: float
    capacity_bps: float

    def __post_init__(self):
        if self.rms_delay_spread_ns < 0:
            raise ValueError("RMS delay spread must be non-negative")


class KFactorResult(NamedTuple):
    k_db: float
    single_component: bool


def k_factor_from_powers(powers_linear: np.ndarray) -> KFactorResult:
    """K = strongest path power over the summed power of all other paths."""
    p = np.asarray(powers_linear, dtype=np.float64)
    if p.size == 0:
        raise ValueError("need at least one component")
    if np.any(p <= 0):
        raise ValueError("powers must be positive linear values")
    if p.size == 1:
        return KFactorResult(math.inf, True)
    k = int(np.argmax(p))
    rest = float(p.sum() - p[k])
    return KFactorResult(10.0 * math.log10(float(p[k]) / rest), False)


def k_factor(profile: MpcProfile) -> KFactorResult:
    """K-factor of a detected profile, strongest component taken as LoS."""
    return k_factor_from_powers(profile.powers_linear)


def delay_spread_from_arrays(delays_ns: np.ndarray,
                             powers_linear: np.ndarray,
                             weighting: str = "squared"
                             ) -> tuple[float, float]:
    """(RMS delay spread, mean delay) in ns.

    The mean delay weights by p_i; the spread weights by p_i**2 in the
    default "squared" mode, or by p_i with weighting="linear".
    """
    d = np.asarray(delays_ns, dtype=np.float64)
    p = np.asarray(powers_linear, dtype=np.float64)
    if d.size == 0 or d.shape != p.shape:
        raise ValueError("need matching non-empty delay and power arrays")
    if np.any(p <= 0):
        raise ValueError("powers must be positive linear values")
    if weighting not in ("squared", "linear"):
        raise ValueError("weighting must be 'squared' or 'linear'")
    mean_delay = float(np.sum(d * p) / np.sum(p))
    w = p * p if weighting == "squared" else p
    spread = math.sqrt(float(np.sum((d - mean_delay) ** 2 * w) / np.sum(w)))
    return spread, mean_delay


def delay_spread(profile: MpcProfile,
                 weighting: str = "squared") -> tuple[float, float]:
    """(RMS delay spread, mean delay) of a detected profile in ns."""
    return delay_spread_from_arrays(profile.delays_ns,
                                    profile.powers_linear, weighting)


def snr_se_capacity(received_power_dbm: float, noise: NoiseModel
                    ) -> tuple[float, float, float]:
    """(SNR dB, spectral efficiency bit/s/Hz, capacity bit/s)."""
    snr_db = received_power_dbm - noise.noise_power_dbm()
    se = se_from_snr(snr_db)
    return snr_db, se, se * noise.bandwidth_hz


def se_from_snr(snr_db: float) -> float:
    """Shannon spectral efficiency log2(1 + SNR)."""
    return math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def empirical_cdf(values) -> np.ndarray:
    """Step CDF as an (n, 2) array of (sorted value, probability i/n)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("need at least one sample")
    probs = np.arange(1, v.size + 1) / v.size
    return np.column_stack([v, probs])

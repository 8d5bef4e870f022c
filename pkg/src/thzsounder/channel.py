"""Synthetic multipath channel: tapped delays, carrier impairments, AWGN.

Provides ground-truth channels for verifying the receiver chain.  Tap delays
are applied in the frequency domain (exact band-limited fractional delay),
followed by an optional hardware frequency response, carrier offset/phase
rotation, and seeded circular-symmetric white noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import fft, ifft, next_fast_len

from .waveform import BasebandSignal

# Scenario K-factor statistics (dB mean, dB^2 variance) for the synthetic
# weather channels: line-of-sight plus a rooftop-reflection cluster near
# 20 ns whose strength follows the fitted per-scenario normal law.
SCENARIO_K_FACTOR_DB: dict[str, tuple[float, float]] = {
    "clear": (35.2, 0.25),
    "rain": (33.5, 0.19),
    "snow": (29.8, 0.22),
}


@dataclass(frozen=True, eq=False)
class TapSet:
    """Ground-truth multipath taps: delays in ns, complex linear gains."""

    delays_ns: np.ndarray
    gains: np.ndarray
    max_delay_ns: float = 409.5

    def __post_init__(self):
        delays = np.ascontiguousarray(self.delays_ns, dtype=np.float64)
        gains = np.ascontiguousarray(self.gains, dtype=np.complex128)
        if delays.ndim != 1 or delays.size == 0:
            raise ValueError("TapSet must contain at least one tap")
        if delays.shape != gains.shape:
            raise ValueError("delays and gains must have matching shapes")
        if delays[0] < 0:
            raise ValueError("tap delays must be non-negative")
        if delays.size > 1 and np.any(np.diff(delays) <= 0):
            raise ValueError("tap delays must be strictly increasing")
        delays.setflags(write=False)
        gains.setflags(write=False)
        object.__setattr__(self, "delays_ns", delays)
        object.__setattr__(self, "gains", gains)

    def __len__(self) -> int:
        return int(self.delays_ns.size)

    @property
    def powers_linear(self) -> np.ndarray:
        return np.abs(self.gains) ** 2


@dataclass(frozen=True, eq=False)
class ImpairmentSet:
    """Receiver-side impairments applied on top of the multipath channel.

    snr_db is referenced to the signal power at the receiver input (after
    channel gains); None disables noise.  hardware_response is a
    (frequencies_hz, complex_gain) pair sampled across the occupied band.
    """

    cfo_hz: float = 0.0
    phase_offset_rad: float = 0.0
    snr_db: float | None = None
    hardware_response: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.hardware_response is not None:
            freqs, gain = self.hardware_response
            freqs = np.ascontiguousarray(freqs, dtype=np.float64)
            gain = np.ascontiguousarray(gain, dtype=np.complex128)
            if freqs.shape != gain.shape or freqs.ndim != 1 or freqs.size < 2:
                raise ValueError("hardware_response needs matching 1-D arrays")
            if np.any(np.diff(freqs) <= 0):
                raise ValueError("hardware_response frequencies must increase")
            if not np.all(np.isfinite(gain)):
                raise ValueError("hardware_response must have finite gains")
            object.__setattr__(self, "hardware_response", (freqs, gain))


def _interp_response(freqs_hz: np.ndarray, grid: np.ndarray,
                     gain: np.ndarray) -> np.ndarray:
    re = np.interp(freqs_hz, grid, gain.real)
    im = np.interp(freqs_hz, grid, gain.imag)
    return re + 1j * im


def apply_channel(signal: BasebandSignal, taps: TapSet,
                  imp: ImpairmentSet | None = None,
                  noise_seed: int = 0) -> BasebandSignal:
    """Run a signal through the tapped-delay channel with impairments.

    Output = sum of delayed/scaled copies, filtered by the hardware
    response, rotated by exp(j(2*pi*cfo*t + phase)), plus seeded AWGN at
    the requested SNR.  Deterministic for a fixed noise_seed.
    """
    if imp is None:
        imp = ImpairmentSet()
    fs = signal.sample_rate_hz
    x = signal.samples
    flags = tuple(signal.flags)

    if float(np.max(taps.delays_ns)) > taps.max_delay_ns:
        warnings.warn("tap delay beyond the unambiguous sounding range; "
                      "profile will alias", RuntimeWarning, stacklevel=2)
        flags = flags + ("aliased_profile",)

    delays_s = taps.delays_ns * 1e-9
    max_delay_samples = int(np.ceil(np.max(delays_s) * fs))
    guard = 64
    n_out = len(x) + max_delay_samples + guard
    nfft = next_fast_len(n_out)

    spec = fft(x, nfft)
    freqs = np.fft.fftfreq(nfft, d=1.0 / fs)
    response = np.zeros(nfft, dtype=np.complex128)
    for d, g in zip(delays_s, taps.gains):
        response += g * np.exp(-2j * np.pi * freqs * d)
    if imp.hardware_response is not None:
        grid, gain = imp.hardware_response
        response *= _interp_response(freqs, grid, gain)
    y = ifft(spec * response)[:n_out]

    if imp.cfo_hz or imp.phase_offset_rad:
        t = np.arange(n_out) / fs
        y = y * np.exp(1j * (2 * np.pi * imp.cfo_hz * t + imp.phase_offset_rad))

    if imp.snr_db is not None and np.isfinite(imp.snr_db):
        # SNR referenced to mean received signal power over the nominal
        # frame duration (input length).
        sig_power = float(np.sum(np.abs(y) ** 2)) / len(x)
        noise_var = sig_power * 10.0 ** (-imp.snr_db / 10.0)
        rng = np.random.default_rng(noise_seed)
        noise = rng.standard_normal(n_out) + 1j * rng.standard_normal(n_out)
        y = y + noise * np.sqrt(noise_var / 2.0)

    return BasebandSignal(y, fs, signal.if_frequency_hz,
                          signal.origin_time_s, flags)


def synth_weather_taps(scenario: str, rng_seed: int = 0,
                       cluster_delay_ns: float = 20.0,
                       max_delay_ns: float = 409.5) -> TapSet:
    """Draw a scenario tap set: unit LoS at 0 ns plus a reflected cluster.

    The cluster's total power is drawn so the tap set's K-factor follows
    the scenario's fitted normal law; the snow scenario therefore carries
    a weakened cluster.
    """
    if scenario not in SCENARIO_K_FACTOR_DB:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of "
                         f"{sorted(SCENARIO_K_FACTOR_DB)}")
    mean_db, var_db = SCENARIO_K_FACTOR_DB[scenario]
    rng = np.random.default_rng(rng_seed)
    k_db = rng.normal(mean_db, np.sqrt(var_db))
    cluster_power = 10.0 ** (-k_db / 10.0)

    n_sub = int(rng.integers(2, 5))
    gaps = 0.2 + rng.exponential(0.8, size=n_sub)
    delays = cluster_delay_ns - 1.0 + np.cumsum(gaps)
    weights = rng.dirichlet(np.ones(n_sub))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_sub)
    gains = np.sqrt(cluster_power * weights) * np.exp(1j * phases)

    return TapSet(np.concatenate([[0.0], delays]),
                  np.concatenate([[1.0 + 0.0j], gains]),
                  max_delay_ns=max_delay_ns)


def default_hardware_response(bandwidth_hz: float, seed: int = 7,
                              n_points: int = 513, ripple_db: float = 3.0,
                              edge_fraction: float = 0.25,
                              edge_floor: float = 0.04
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Smooth seeded +/-ripple_db magnitude ripple with band-edge skirts.

    Models the frequency-selective frontend: a gentle random ripple across
    the central band and a raised-cosine roll-off to `edge_floor` over the
    outer `edge_fraction` of each band edge.  Zero phase.
    """
    rng = np.random.default_rng(seed)
    freqs = np.linspace(-bandwidth_hz / 2.0, bandwidth_hz / 2.0, n_points)
    u = freqs / bandwidth_hz  # [-0.5, 0.5]
    ripple = np.zeros(n_points)
    for k in range(1, 5):
        ripple += rng.uniform(0.3, 1.0) * np.cos(
            2 * np.pi * k * u + rng.uniform(0, 2 * np.pi))
    ripple *= ripple_db / np.max(np.abs(ripple))

    skirt_start = 0.5 - edge_fraction
    edge = np.abs(u) > skirt_start
    frac = np.zeros(n_points)
    frac[edge] = (np.abs(u[edge]) - skirt_start) / edge_fraction
    # the ripple is an in-band effect: fade it out across the skirts so the
    # band-edge roll-off is deterministic
    mag = 10.0 ** (ripple * 0.5 * (1.0 + np.cos(np.pi * frac)) / 20.0)
    taper = edge_floor + (1.0 - edge_floor) * 0.5 * (1.0 + np.cos(np.pi * frac))
    mag *= taper
    return freqs, mag.astype(np.complex128)

"""Sounding-waveform synthesis: m-sequences, frame assembly, BPSK + RRC shaping.

The transmit frame is a long PN header (frame sync / calibration / carrier
recovery) followed by a shorter PN body repeated several times for channel
sensing.  Chips are BPSK mapped (0 -> -1, 1 -> +1) and shaped with a
root-raised-cosine pulse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve


class NonPrimitivePolynomialError(ValueError):
    """Feedback taps do not define a primitive polynomial (short LFSR period)."""


# Default feedback tap positions (primitive polynomials) per register length.
# Any primitive polynomial of the same degree yields the same correlation
# properties; these are classic maximal-length choices and every entry is
# checked for full period by generate_mseq.
DEFAULT_TAPS: dict[int, tuple[int, ...]] = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 6, 4, 1),
    13: (13, 4, 3, 1),
    14: (14, 5, 3, 1),
    15: (15, 14),
    16: (16, 15, 13, 4),
    17: (17, 14),
    18: (18, 11),
    19: (19, 6, 2, 1),
    20: (20, 17),
}


@dataclass(frozen=True, eq=False)
class ChipSequence:
    """Binary chip sequence; degree/taps are set for generated m-sequences."""

    chips: np.ndarray
    degree: int | None = None
    taps: tuple[int, ...] | None = None

    def __post_init__(self):
        chips = np.ascontiguousarray(self.chips, dtype=np.uint8)
        if chips.ndim != 1 or chips.size == 0:
            raise ValueError("chips must be a non-empty 1-D array")
        if chips.max(initial=0) > 1:
            raise ValueError("chips must be binary {0, 1}")
        chips.setflags(write=False)
        object.__setattr__(self, "chips", chips)

    def __len__(self) -> int:
        return int(self.chips.size)

    def bipolar(self) -> np.ndarray:
        """Chips mapped 0 -> -1.0, 1 -> +1.0."""
        return self.chips.astype(np.float64) * 2.0 - 1.0

    def circular_autocorrelation(self) -> np.ndarray:
        """Periodic autocorrelation of the +/-1 mapped chips, all lags."""
        b = self.bipolar()
        spec = np.fft.rfft(b)
        acf = np.fft.irfft(spec * np.conj(spec), n=b.size)
        return np.round(acf).astype(np.int64)


def generate_mseq(degree: int, taps: tuple[int, ...] | None = None,
                  seed: int | None = None) -> ChipSequence:
    """Generate a maximal-length sequence from a Fibonacci LFSR.

    taps are the exponents of the feedback polynomial (degree included,
    constant term implicit).  seed is the initial register state as an
    integer (defaults to all ones).  Raises NonPrimitivePolynomialError if
    the generated period falls short of 2**degree - 1.
    """
    if not 2 <= degree <= 20:
        raise ValueError(f"degree must be in [2, 20], got {degree}")
    if taps is None:
        taps = DEFAULT_TAPS[degree]
    taps = tuple(sorted(set(int(t) for t in taps), reverse=True))
    if not taps or taps[0] != degree or taps[-1] < 1:
        raise ValueError(f"taps must be positions in [1, degree] including "
                         f"the degree itself, got {taps}")
    mask = (1 << degree) - 1
    if seed is None:
        seed = mask
    seed = int(seed)
    if seed == 0:
        raise ValueError("seed register state must be non-zero")
    if not 0 < seed <= mask:
        raise ValueError(f"seed must fit in {degree} bits")

    tapmask = 0
    for t in taps:
        tapmask |= 1 << (t - 1)
    length = mask  # 2**degree - 1
    out = np.empty(length, dtype=np.uint8)
    state = seed
    for i in range(length):
        out[i] = (state >> (degree - 1)) & 1
        fb = (state & tapmask).bit_count() & 1
        state = ((state << 1) | fb) & mask
        if state == seed and i + 1 < length:
            raise NonPrimitivePolynomialError(
                f"taps {taps} give period {i + 1} < {length}; "
                f"polynomial is not primitive")
    if state != seed:
        raise NonPrimitivePolynomialError(
            f"taps {taps} did not close a full cycle of length {length}")
    return ChipSequence(out, degree=degree, taps=taps)


@dataclass(frozen=True, eq=False)
class FrameLayout:
    """Frame structure: header sequence, repeated body sequence, chip timing."""

    header: ChipSequence
    body: ChipSequence
    repetitions: int = 16
    chip_duration_ns: float = 0.1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.chip_duration_ns <= 0:
            raise ValueError("chip_duration_ns must be positive")

    @classmethod
    def default(cls, repetitions: int = 16,
                chip_duration_ns: float = 0.1) -> "FrameLayout":
        """8191-chip header + 4095-chip body at 10 Gchip/s."""
        return cls(header=generate_mseq(13), body=generate_mseq(12),
                   repetitions=repetitions, chip_duration_ns=chip_duration_ns)

    @property
    def total_chips(self) -> int:
        return len(self.header) + self.repetitions * len(self.body)

    @property
    def chip_rate_hz(self) -> float:
        return 1e9 / self.chip_duration_ns

    @property
    def frame_duration_ns(self) -> float:
        return self.total_chips * self.chip_duration_ns

    @property
    def max_unambiguous_delay_ns(self) -> float:
        """Largest delay resolvable without ambiguity: one body period."""
        return len(self.body) * self.chip_duration_ns


def build_frame(layout: FrameLayout) -> ChipSequence:
    """Concatenate header followed by the body repeated `repetitions` times."""
    chips = np.concatenate([layout.header.chips]
                           + [layout.body.chips] * layout.repetitions)
    return ChipSequence(chips)


@dataclass(frozen=True, eq=False)
class PulseShape:
    """Root-raised-cosine shaping filter parameters.

    rolloff 0 with span_chips 1 degenerates to a rectangular (unshaped)
    chip pulse.  Taps are normalized so an isolated chip carries unit
    energy with time measured in chip periods, i.e. sum(h**2) equals
    samples_per_chip and a dense random +/-1 chip stream has unit power.
    """

    rolloff: float = 0.25
    span_chips: int = 8
    samples_per_chip: int = 2

    def __post_init__(self):
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError("rolloff must be in [0, 1]")
        if self.span_chips < 1 or self.samples_per_chip < 1:
            raise ValueError("span_chips and samples_per_chip must be >= 1")
        if not self.is_rectangular and (self.span_chips * self.samples_per_chip) % 2:
            raise ValueError("span_chips * samples_per_chip must be even "
                             "for a symmetric RRC filter")

    @property
    def is_rectangular(self) -> bool:
        return self.rolloff == 0.0 and self.span_chips == 1

    def taps(self) -> np.ndarray:
        return _pulse_taps(self.rolloff, self.span_chips, self.samples_per_chip)

    @property
    def group_delay_samples(self) -> int:
        return 0 if self.is_rectangular else (self.span_chips * self.samples_per_chip) // 2


def rrc_taps(rolloff: float, span_chips: int, samples_per_chip: int) -> np.ndarray:
    """Root-raised-cosine taps over span_chips, unit peak-normalized later.

    Time axis is in chip periods; the filter has span*sps + 1 symmetric taps.
    """
    sps = samples_per_chip
    n = span_chips * sps + 1
    t = (np.arange(n) - (n - 1) / 2.0) / sps  # chip periods
    beta = rolloff
    h = np.empty(n)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            h[i] = 1.0 + beta * (4.0 / math.pi - 1.0)
        elif beta > 0 and abs(abs(ti) - 1.0 / (4.0 * beta)) < 1e-9:
            h[i] = (beta / math.sqrt(2.0)) * (
                (1.0 + 2.0 / math.pi) * math.sin(math.pi / (4.0 * beta))
                + (1.0 - 2.0 / math.pi) * math.cos(math.pi / (4.0 * beta)))
        else:
            num = (math.sin(math.pi * ti * (1.0 - beta))
                   + 4.0 * beta * ti * math.cos(math.pi * ti * (1.0 + beta)))
            den = math.pi * ti * (1.0 - (4.0 * beta * ti) ** 2)
            h[i] = num / den
    return h


def _pulse_taps(rolloff: float, span_chips: int, sps: int) -> np.ndarray:
    if rolloff == 0.0 and span_chips == 1:
        return np.ones(sps)
    h = rrc_taps(rolloff, span_chips, sps)
    # unit per-chip pulse energy: sum(h^2) = samples_per_chip
    return h * math.sqrt(sps / np.sum(h * h))


@dataclass(frozen=True, eq=False)
class BasebandSignal:
    """Uniformly sampled complex baseband (or IF-centered) waveform."""

    samples: np.ndarray
    sample_rate_hz: float
    if_frequency_hz: float = 0.0
    origin_time_s: float = 0.0
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1:
            raise ValueError("samples must be 1-D")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    def power(self) -> float:
        return self.energy() / max(len(self), 1)


def modulate(frame: ChipSequence, shape: PulseShape,
             chip_rate_hz: float = 1e10,
             if_frequency_hz: float = 0.0) -> BasebandSignal:
    """BPSK-map chips, pulse shape, and optionally shift to an IF carrier."""
    sps = shape.samples_per_chip
    fs = chip_rate_hz * sps
    if if_frequency_hz:
        occupied = (1.0 + shape.rolloff) * chip_rate_hz / 2.0
        if abs(if_frequency_hz) + occupied > fs / 2.0:
            raise ValueError(
                f"IF {if_frequency_hz:g} Hz plus chip bandwidth {occupied:g} Hz "
                f"exceeds Nyquist {fs / 2:g} Hz (aliasing)")
    symbols = frame.bipolar()
    upsampled = np.zeros(len(symbols) * sps)
    upsampled[::sps] = symbols
    shaped = fftconvolve(upsampled, shape.taps(), mode="full")
    samples = shaped.astype(np.complex128)
    if if_frequency_hz:
        t = np.arange(samples.size) / fs
        samples = samples * np.exp(2j * np.pi * if_frequency_hz * t)
    return BasebandSignal(samples, fs, if_frequency_hz)


def demodulate(signal: BasebandSignal, shape: PulseShape, n_chips: int,
               chip_rate_hz: float = 1e10) -> np.ndarray:
    """Matched-filter loopback demodulation back to hard chips.

    Assumes the signal starts at the frame origin (no channel delay).
    """
    sps = shape.samples_per_chip
    fs = chip_rate_hz * sps
    x = signal.samples
    if signal.if_frequency_hz:
        t = np.arange(x.size) / fs
        x = x * np.exp(-2j * np.pi * signal.if_frequency_hz * t)
    h = shape.taps()
    mf = fftconvolve(x, h[::-1], mode="full")
    idx = np.arange(n_chips) * sps + (h.size - 1)
    if idx[-1] >= mf.size:
        raise ValueError("signal too short for requested chip count")
    soft = mf[idx].real / sps
    return (soft > 0).astype(np.uint8)


def frame_waveform(layout: FrameLayout, shape: PulseShape,
                   if_frequency_hz: float = 0.0) -> BasebandSignal:
    """Shaped waveform of the full frame at the layout's chip rate."""
    return modulate(build_frame(layout), shape, layout.chip_rate_hz,
                    if_frequency_hz)

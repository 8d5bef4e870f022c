"""Sounder signal-processing backend.

Frame synchronization against the shaped header, power-spectrum hardware
calibration, two-stage carrier recovery over the repeated body sequence,
sliding correlation with coherent repetition averaging, and multipath peak
extraction by iterative maximum search with model subtraction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import fft, ifft
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.signal import fftconvolve, resample

from .waveform import (BasebandSignal, ChipSequence, FrameLayout, PulseShape,
                       build_frame, modulate)


class FrameNotFoundError(RuntimeError):
    """No frame header detected above the correlation threshold."""


class CarrierLockError(RuntimeError):
    """Carrier recovery did not converge to a stable phase track."""


@dataclass(frozen=True, eq=False)
class CalibrationProfile:
    """Per-bin hardware magnitude response estimated from power spectra.

    `response` holds the raw estimate; application divides by the
    unit-median normalized response.
    """

    frequencies_hz: np.ndarray
    response: np.ndarray
    noise_power: float
    clamped_bins: int = 0

    def __post_init__(self):
        freqs = np.ascontiguousarray(self.frequencies_hz, dtype=np.float64)
        resp = np.ascontiguousarray(self.response, dtype=np.complex128)
        if freqs.shape != resp.shape or freqs.ndim != 1 or freqs.size < 2:
            raise ValueError("frequencies and response must be matching 1-D")
        if np.any(np.abs(resp) <= 0):
            raise ValueError("calibration response must be non-zero after "
                             "regularization")
        freqs.setflags(write=False)
        resp.setflags(write=False)
        object.__setattr__(self, "frequencies_hz", freqs)
        object.__setattr__(self, "response", resp)

    def normalized(self) -> np.ndarray:
        return self.response / np.median(np.abs(self.response))


@dataclass(frozen=True)
class CarrierEstimate:
    """Carrier frequency/phase recovered from the body repetitions."""

    freq_offset_hz: float
    phase_offset_rad: float
    readings_averaged: int
    locked: bool
    phase_residual_var: float

    def __post_init__(self):
        if self.readings_averaged < 1:
            raise ValueError("readings_averaged must be >= 1")


@dataclass(frozen=True)
class MpcComponent:
    """One detected multipath component."""

    delay_ns: float
    power_db: float
    amplitude: complex


@dataclass(frozen=True, eq=False)
class MpcProfile:
    """Detected multipath components with detection metadata.

    Powers are dB relative to a unit-gain tap; add a link-budget reference
    to express absolute dBm.
    """

    components: tuple[MpcComponent, ...]
    noise_floor_db: float
    dynamic_range_db: float
    frame_id: int = 0

    def __post_init__(self):
        if self.components:
            top = max(c.power_db for c in self.components)
            for c in self.components:
                if c.power_db < top - self.dynamic_range_db - 1e-9:
                    raise ValueError("component below the dynamic-range window")

    @property
    def delays_ns(self) -> np.ndarray:
        return np.array([c.delay_ns for c in self.components])

    @property
    def powers_db(self) -> np.ndarray:
        return np.array([c.power_db for c in self.components])

    @property
    def powers_linear(self) -> np.ndarray:
        return 10.0 ** (self.powers_db / 10.0)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c.amplitude for c in self.components])


@dataclass(frozen=True, eq=False)
class DelayProfile:
    """Averaged correlator output on the receiver's delay grid."""

    delays_ns: np.ndarray
    corr: np.ndarray
    sample_rate_hz: float
    repetitions_averaged: int
    reference: "CorrelatorReference"
    flags: tuple[str, ...] = ()

    @property
    def power_linear(self) -> np.ndarray:
        return np.abs(self.corr) ** 2

    @property
    def power_db(self) -> np.ndarray:
        return 10.0 * np.log10(np.maximum(self.power_linear, 1e-300))


class CorrelatorReference:
    """Precomputed replicas and the exact correlation response model.

    The response model R(delta) is the averaged correlation of the body
    replica against the clean transmit stream evaluated on a fine delay
    grid; it captures the pulse autocorrelation, the PN pedestal, and
    frame-edge effects, so a tap at delay d contributes amp * R(tau - d)
    to the measured profile.
    """

    FINE_FACTOR = 8  # fine grid resolution: 1/(8*sps) chip

    def __init__(self, layout: FrameLayout, shape: PulseShape,
                 guard_chips: int = 16):
        self.layout = layout
        self.shape = shape
        self.guard_chips = guard_chips
        self.sps = shape.samples_per_chip
        self.fs = layout.chip_rate_hz * self.sps
        self.header_wave = modulate(layout.header, shape, layout.chip_rate_hz)
        self.body_wave = modulate(layout.body, shape, layout.chip_rate_hz)
        self.tx_wave = modulate(build_frame(layout), shape, layout.chip_rate_hz)
        self.span_chips = len(layout.body)
        self.span_samples = self.span_chips * self.sps
        self.guard_samples = guard_chips * self.sps
        self._build_response()

    def rep_start_samples(self, i: int) -> int:
        return (len(self.layout.header) + i * len(self.layout.body)) * self.sps

    def _build_response(self):
        # The capture chain is bandlimited at the receiver rate, so the
        # fine-grid stream is the FFT interpolation of the discrete transmit
        # waveform; fractional tap delays then match the model exactly.
        q = self.FINE_FACTOR
        tx = self.tx_wave.samples.real
        tx_fine = resample(tx, tx.size * q)
        rep = self.body_wave.samples.real
        kern = np.zeros(rep.size * q)
        kern[::q] = rep

        k_half = (self.span_chips + 2 * self.guard_chips) * self.sps * q
        n_reps = self.layout.repetitions
        acc = None
        pad = np.zeros(k_half + kern.size)
        tx_ext = np.concatenate([pad, tx_fine, pad])
        for i in range(n_reps):
            s = self.rep_start_samples(i) * q + pad.size
            seg = tx_ext[s - k_half: s + k_half + kern.size]
            g = fftconvolve(seg, kern[::-1], mode="valid")
            acc = g if acc is None else acc + g
        acc /= n_reps
        self._fine_delta_ns = (np.arange(-k_half, k_half + 1)
                               / (self.fs * q)) * 1e9
        center = k_half
        self.norm = float(acc[center])
        self._response_fine = acc / self.norm
        self._spline = CubicSpline(self._fine_delta_ns, self._response_fine)
        self._domain = (self._fine_delta_ns[0], self._fine_delta_ns[-1])

    def response(self, delta_ns: np.ndarray | float) -> np.ndarray:
        """Model correlation response at delay offsets in ns."""
        delta = np.asarray(delta_ns, dtype=np.float64)
        out = np.zeros_like(delta)
        lo, hi = self._domain
        inside = (delta >= lo) & (delta <= hi)
        out[inside] = self._spline(delta[inside])
        return out


_REFERENCE_CACHE: dict[tuple, CorrelatorReference] = {}


def make_reference(layout: FrameLayout, shape: PulseShape) -> CorrelatorReference:
    key = (layout.header.chips.tobytes(), layout.body.chips.tobytes(),
           layout.repetitions, layout.chip_duration_ns,
           shape.rolloff, shape.span_chips, shape.samples_per_chip)
    ref = _REFERENCE_CACHE.get(key)
    if ref is None:
        ref = CorrelatorReference(layout, shape)
        _REFERENCE_CACHE[key] = ref
    return ref


def baseband(signal: BasebandSignal) -> BasebandSignal:
    """Mix an IF-centered signal down to complex baseband."""
    if not signal.if_frequency_hz:
        return signal
    t = np.arange(len(signal)) / signal.sample_rate_hz
    samples = signal.samples * np.exp(-2j * np.pi * signal.if_frequency_hz * t)
    return BasebandSignal(samples, signal.sample_rate_hz, 0.0,
                          signal.origin_time_s, signal.flags)


@dataclass(frozen=True)
class SyncResult:
    offset: int
    score: float


def synchronize(signal: BasebandSignal, header: ChipSequence,
                shape: PulseShape, chip_rate_hz: float,
                threshold: float = 0.25,
                search_start: int = 0,
                search_length: int | None = None) -> SyncResult:
    """Locate the frame start by normalized header cross-correlation."""
    rep = modulate(header, shape, chip_rate_hz).samples.real
    x = signal.samples
    if search_length is None:
        stop = x.size
    else:
        stop = min(x.size, search_start + search_length + rep.size)
    x = x[search_start:stop]
    if x.size < rep.size:
        raise FrameNotFoundError("signal shorter than one header")

    corr = fftconvolve(x, rep[::-1], mode="valid")
    energy = np.concatenate([[0.0], np.cumsum(np.abs(x) ** 2)])
    window_energy = energy[rep.size:] - energy[:-rep.size]
    rep_energy = float(np.sum(rep * rep))
    denom = np.sqrt(np.maximum(window_energy * rep_energy, 1e-300))
    score = np.abs(corr) / denom
    k = int(np.argmax(score))
    if score[k] < threshold:
        raise FrameNotFoundError(
            f"no frame found: best header correlation {score[k]:.3f} "
            f"below threshold {threshold:.3f}")
    return SyncResult(offset=search_start + k, score=float(score[k]))


def build_calibration(frequencies_hz: np.ndarray, rx_power: np.ndarray,
                      tx_power: np.ndarray, noise_power: float,
                      floor_ratio: float = 0.01) -> CalibrationProfile:
    """Estimate |H(k)| = sqrt((P_r(k) - P_n) / P_s(k)) with a floored radicand.

    Bins where noise exceeds the received power clamp to
    floor_ratio * P_s(k) and are counted in clamped_bins.
    """
    freqs = np.asarray(frequencies_hz, dtype=np.float64)
    rx = np.asarray(rx_power, dtype=np.float64)
    tx = np.asarray(tx_power, dtype=np.float64)
    if not (freqs.shape == rx.shape == tx.shape):
        raise ValueError("spectra must share one frequency grid")
    if np.any(rx < 0):
        raise ValueError("received power must be non-negative")
    if np.any(tx <= 0):
        raise ValueError("transmit power must be positive at every bin")
    radicand = rx - noise_power
    floor = floor_ratio * tx
    clamped = int(np.sum(radicand < floor))
    radicand = np.maximum(radicand, floor)
    h = np.sqrt(radicand / tx)
    return CalibrationProfile(freqs, h.astype(np.complex128),
                              float(noise_power), clamped)


def apply_calibration(frequencies_hz: np.ndarray, spectrum: np.ndarray,
                      cal: CalibrationProfile) -> np.ndarray:
    """Divide a spectrum by the unit-median-normalized response per bin."""
    h = cal.normalized()
    h_interp = (np.interp(frequencies_hz, cal.frequencies_hz, h.real)
                + 1j * np.interp(frequencies_hz, cal.frequencies_hz, h.imag))
    return np.asarray(spectrum) / h_interp


def calibrate_signal(signal: BasebandSignal,
                     cal: CalibrationProfile) -> BasebandSignal:
    """Apply the inverse normalized response across the signal spectrum.

    Bins outside the calibration grid are left untouched.
    """
    x = signal.samples
    spec = fft(x)
    freqs = np.fft.fftfreq(x.size, d=1.0 / signal.sample_rate_hz)
    h = cal.normalized()
    inside = (freqs >= cal.frequencies_hz[0]) & (freqs <= cal.frequencies_hz[-1])
    h_interp = np.ones(x.size, dtype=np.complex128)
    h_interp[inside] = (np.interp(freqs[inside], cal.frequencies_hz, h.real)
                        + 1j * np.interp(freqs[inside], cal.frequencies_hz,
                                         h.imag))
    out = ifft(spec / h_interp)
    return BasebandSignal(out, signal.sample_rate_hz, signal.if_frequency_hz,
                          signal.origin_time_s, signal.flags)


def estimate_carrier(signal: BasebandSignal, reference: ChipSequence,
                     layout: FrameLayout, shape: PulseShape,
                     sync_offset: int = 0,
                     lock_threshold: float = 0.5) -> CarrierEstimate:
    """Two-stage carrier recovery over the repeated body sequence.

    Stage one tracks the sliding correlation-peak phase across the body
    repetitions; its slope gives the frequency offset.  Stage two removes
    the fitted ramp and averages the residual phasors for the static phase
    offset.  Pull-in range is bounded by half a cycle per repetition,
    1 / (2 * body duration) (~1.2 MHz at the default layout).
    """
    ref = make_reference(layout, shape)
    if len(reference) != len(layout.body):
        raise ValueError("carrier reference must be the layout body sequence")
    x = signal.samples
    rep = ref.body_wave.samples.real
    n_reps = layout.repetitions

    s0 = sync_offset + ref.rep_start_samples(0)
    seg = x[s0: s0 + ref.span_samples + rep.size]
    if seg.size < rep.size:
        raise ValueError("signal does not span one body repetition")
    c0 = fftconvolve(seg, rep[::-1], mode="valid")
    k_star = int(np.argmax(np.abs(c0)))

    z = np.empty(n_reps, dtype=np.complex128)
    usable = 0
    for i in range(n_reps):
        start = sync_offset + ref.rep_start_samples(i) + k_star
        chunk = x[start: start + rep.size]
        if chunk.size < rep.size:
            break
        z[usable] = np.dot(rep, chunk)
        usable += 1
    if usable < 2:
        raise ValueError("need at least two body repetitions for carrier "
                         "estimation")
    z = z[:usable]

    weights = np.abs(z)
    if not np.all(weights > 0):
        raise CarrierLockError("carrier recovery unlocked: vanishing "
                               "correlation magnitude")
    theta = np.unwrap(np.angle(z))
    idx = np.arange(usable, dtype=np.float64)
    w = weights / weights.sum()
    xm = np.sum(w * idx)
    ym = np.sum(w * theta)
    denom = np.sum(w * (idx - xm) ** 2)
    slope = float(np.sum(w * (idx - xm) * (theta - ym)) / denom)
    resid = theta - (ym + slope * (idx - xm))
    resid_var = float(np.sum(w * resid ** 2))

    t_rep = len(layout.body) * layout.chip_duration_ns * 1e-9
    freq = slope / (2.0 * np.pi * t_rep)
    phase = float(np.angle(np.sum(z * np.exp(-1j * slope * idx))))
    locked = resid_var < lock_threshold
    return CarrierEstimate(freq_offset_hz=freq, phase_offset_rad=phase,
                           readings_averaged=usable, locked=locked,
                           phase_residual_var=resid_var)


def correct_carrier(signal: BasebandSignal,
                    estimate: CarrierEstimate) -> BasebandSignal:
    """Remove the estimated carrier frequency ramp (phase left untouched)."""
    t = np.arange(len(signal)) / signal.sample_rate_hz
    samples = signal.samples * np.exp(-2j * np.pi * estimate.freq_offset_hz * t)
    return BasebandSignal(samples, signal.sample_rate_hz,
                          signal.if_frequency_hz, signal.origin_time_s,
                          signal.flags)


def correlate_profile(signal: BasebandSignal, body: ChipSequence,
                      layout: FrameLayout, shape: PulseShape,
                      sync_offset: int = 0,
                      delay_span_ns: float | None = None) -> DelayProfile:
    """Sliding correlation averaged coherently over the body repetitions.

    The output is normalized by the replica pulse energy and sequence
    length so a unit-gain tap reads power 1.0 (0 dB).
    """
    ref = make_reference(layout, shape)
    if len(body) != len(layout.body):
        raise ValueError("correlation reference must be the layout body")
    if delay_span_ns is None:
        delay_span_ns = layout.max_unambiguous_delay_ns
    # The last pulse-span lags before the body-period ambiguity carry the
    # aliased image of every tap; keep the profile inside the clean region.
    span_cap = (len(layout.body) - 2 * shape.span_chips) * ref.sps
    span_samples = min(int(round(delay_span_ns * 1e-9 * ref.fs)), span_cap)
    guard = ref.guard_samples
    rep = ref.body_wave.samples.real
    x = signal.samples

    n_lags = guard + span_samples
    seg_len = n_lags - 1 + rep.size
    acc = np.zeros(n_lags, dtype=np.complex128)
    used = 0
    flags: tuple[str, ...] = tuple(signal.flags)
    for i in range(layout.repetitions):
        start = sync_offset + ref.rep_start_samples(i) - guard
        if start < 0 or start + guard + rep.size > x.size:
            continue
        seg = x[start: start + seg_len]
        if seg.size < seg_len:
            seg = np.concatenate([seg, np.zeros(seg_len - seg.size,
                                                dtype=x.dtype)])
        acc += fftconvolve(seg, rep[::-1], mode="valid")
        used += 1
    if used == 0:
        raise ValueError("signal does not cover any body repetition")
    if used < layout.repetitions:
        warnings.warn(f"only {used}/{layout.repetitions} repetitions "
                      f"available; averaging is partial", RuntimeWarning,
                      stacklevel=2)
        flags = flags + ("partial_average",)
    corr = acc / (used * ref.norm)
    delays_ns = (np.arange(-guard, span_samples) / ref.fs) * 1e9
    return DelayProfile(delays_ns=delays_ns, corr=corr,
                        sample_rate_hz=ref.fs, repetitions_averaged=used,
                        reference=ref, flags=flags)


def _refine_component(corr: np.ndarray, delays_ns: np.ndarray, k: int,
                      ref: CorrelatorReference) -> tuple[float, complex]:
    """Least-squares single-path fit around grid index k."""
    fs_ns = ref.fs * 1e-9
    half_window = 3 * ref.sps
    lo = max(0, k - half_window)
    hi = min(corr.size, k + half_window + 1)
    c_w = corr[lo:hi]
    d_w = delays_ns[lo:hi]
    step_ns = 1.0 / fs_ns

    def negq(d):
        r = ref.response(d_w - d)
        rr = float(np.dot(r, r))
        if rr <= 0:
            return 0.0
        cr = np.dot(r, c_w)
        return -(abs(cr) ** 2) / rr

    d0 = delays_ns[k]
    res = minimize_scalar(negq, bounds=(d0 - 0.6 * step_ns, d0 + 0.6 * step_ns),
                          method="bounded",
                          options={"xatol": 1e-7})
    d_hat = float(res.x)
    r = ref.response(d_w - d_hat)
    amp = complex(np.dot(r, c_w) / np.dot(r, r))
    return d_hat, amp


def detect_peaks(pdp: DelayProfile, dynamic_range_db: float = 60.0,
                 resolution_ns: float = 0.1,
                 noise_margin_db: float = 3.0,
                 max_components: int = 64,
                 refine_passes: int = 6,
                 frame_id: int = 0) -> MpcProfile:
    """Extract multipath components by iterative global-maximum search.

    Each iteration takes the residual's strongest peak, fits delay and
    complex amplitude against the correlation response model, subtracts the
    fitted contribution, and repeats while candidates clear both the
    dynamic-range window and the noise-floor threshold (the estimated
    per-bin noise mean scaled to the expected extreme over the profile
    length, plus noise_margin_db).  Components closer than `resolution_ns`
    to an accepted one are masked rather than recorded.
    """
    if pdp.corr.size == 0:
        raise ValueError("empty delay profile")
    ref = pdp.reference
    corr = pdp.corr.copy()
    delays = pdp.delays_ns
    # Detection limit: expected extreme of the exponential noise bins over
    # the profile length (false-alarm level), plus the configured margin.
    # The floor is re-estimated from the shrinking residual because the raw
    # profile median includes the PN correlation pedestal of strong paths,
    # which the model subtraction removes.
    extreme_scale = max(math.log(corr.size), 1.0)
    margin = extreme_scale * 10.0 ** (noise_margin_db / 10.0)

    masked = np.zeros(corr.size, dtype=bool)
    found: list[tuple[float, complex]] = []
    top_power = 0.0
    noise_floor = float(np.median(np.abs(corr) ** 2) / math.log(2.0))
    while len(found) < max_components:
        power = np.abs(corr) ** 2
        noise_floor = float(np.median(power) / math.log(2.0))
        power[masked] = 0.0
        k = int(np.argmax(power))
        pk = float(power[k])
        limit = noise_floor * margin
        if found:
            limit = max(limit, top_power * 10.0 ** (-dynamic_range_db / 10.0))
        if pk < limit or pk <= 0.0:
            break
        d_hat, amp = _refine_component(corr, delays, k, ref)
        if any(abs(d_hat - d) < resolution_ns * (1.0 - 1e-9) for d, _ in found):
            masked[np.abs(delays - delays[k]) < 0.5 * resolution_ns] = True
            continue
        corr -= amp * ref.response(delays - d_hat)
        found.append((d_hat, amp))
        top_power = max(top_power, abs(amp) ** 2)

    for _ in range(refine_passes):
        if len(found) < 2:
            break
        order = np.argsort([-abs(a) for _, a in found])
        for idx in order:
            d_old, a_old = found[idx]
            corr += a_old * ref.response(delays - d_old)
            k = int(np.argmin(np.abs(delays - d_old)))
            d_new, a_new = _refine_component(corr, delays, k, ref)
            corr -= a_new * ref.response(delays - d_new)
            found[idx] = (d_new, a_new)

    if found:
        top_power = max(abs(a) ** 2 for _, a in found)
        cutoff = top_power * 10.0 ** (-dynamic_range_db / 10.0)
        found = [(d, a) for d, a in found if abs(a) ** 2 >= cutoff]
    found.sort(key=lambda da: da[0])

    components = tuple(
        MpcComponent(delay_ns=d, power_db=10.0 * math.log10(abs(a) ** 2),
                     amplitude=a)
        for d, a in found)
    noise_floor_db = 10.0 * math.log10(max(noise_floor, 1e-300))
    return MpcProfile(components=components, noise_floor_db=noise_floor_db,
                      dynamic_range_db=dynamic_range_db, frame_id=frame_id)


def reconstruct_profile(profile: MpcProfile,
                        template: DelayProfile) -> DelayProfile:
    """Rebuild a delay profile from detected components (model synthesis)."""
    ref = template.reference
    corr = np.zeros_like(template.corr)
    for c in profile.components:
        corr += c.amplitude * ref.response(template.delays_ns - c.delay_ns)
    return DelayProfile(delays_ns=template.delays_ns, corr=corr,
                        sample_rate_hz=template.sample_rate_hz,
                        repetitions_averaged=template.repetitions_averaged,
                        reference=ref, flags=template.flags)


@dataclass(frozen=True, eq=False)
class FrameResult:
    """Everything recovered from one frame."""

    profile: MpcProfile
    carrier: CarrierEstimate
    sync_offset: int
    sync_score: float


def process_frame(signal: BasebandSignal, layout: FrameLayout,
                  shape: PulseShape, *,
                  calibration: CalibrationProfile | None = None,
                  dynamic_range_db: float = 60.0,
                  resolution_ns: float = 0.1,
                  sync_threshold: float = 0.25,
                  search_start: int = 0,
                  search_length: int | None = None,
                  delay_span_ns: float | None = None,
                  frame_id: int = 0,
                  require_lock: bool = True) -> FrameResult:
    """Full per-frame chain: sync, carrier, calibration, correlate, detect."""
    x = baseband(signal)
    sync = synchronize(x, layout.header, shape, layout.chip_rate_hz,
                       threshold=sync_threshold, search_start=search_start,
                       search_length=search_length)
    carrier = estimate_carrier(x, layout.body, layout, shape,
                               sync_offset=sync.offset)
    if require_lock and not carrier.locked:
        raise CarrierLockError(
            f"carrier recovery unlocked (phase residual variance "
            f"{carrier.phase_residual_var:.3f})")
    x = correct_carrier(x, carrier)
    if calibration is not None:
        x = calibrate_signal(x, calibration)
    pdp = correlate_profile(x, layout.body, layout, shape,
                            sync_offset=sync.offset,
                            delay_span_ns=delay_span_ns)
    profile = detect_peaks(pdp, dynamic_range_db=dynamic_range_db,
                           resolution_ns=resolution_ns, frame_id=frame_id)
    return FrameResult(profile=profile, carrier=carrier,
                       sync_offset=sync.offset, sync_score=sync.score)

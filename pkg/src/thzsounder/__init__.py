"""Sliding-correlator channel-sounding simulation and analysis toolkit.

Covers the full pipeline for a 130-150 GHz point-to-point link study:
sounding-waveform synthesis, weather-dependent channel simulation,
receiver-side impulse-response extraction, and statistical channel
characterization (link budget, K-factor, delay spread, capacity,
distribution fits).
"""

from .channel import (ImpairmentSet, TapSet, apply_channel,
                      default_hardware_response, synth_weather_taps)
from .fitting import (FitResult, eval_cdf, fit_normal, fit_rician, fit_stable,
                      sample_rician, sample_stable)
from .metrics import (ChannelMetrics, NoiseModel, delay_spread, empirical_cdf,
                      k_factor, snr_se_capacity)
from .receiver import (CalibrationProfile, CarrierEstimate, DelayProfile,
                       FrameNotFoundError, MpcComponent, MpcProfile,
                       apply_calibration, build_calibration, calibrate_signal,
                       correct_carrier, correlate_profile, detect_peaks,
                       estimate_carrier, process_frame, synchronize)
from .waveform import (BasebandSignal, ChipSequence, FrameLayout, PulseShape,
                       build_frame, demodulate, frame_waveform, generate_mseq,
                       modulate)
from .weather import (GasAttenuationTable, LinkBudget, SnowModelParams,
                      WeatherState, debye_mixture, fspl, gas_attenuation,
                      link_budget_eval, mie_extinction, rain_attenuation,
                      snow_attenuation, snowflake_count)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]

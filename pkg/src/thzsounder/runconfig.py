"""Run configuration: JSON document with strict key validation.

Unknown keys are rejected with their dotted path; referenced files must
resolve at load time.  Section accessors build the domain objects used by
the CLI pipeline.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .channel import SCENARIO_K_FACTOR_DB
from .metrics import NoiseModel
from .waveform import FrameLayout, PulseShape, generate_mseq
from .weather import LinkBudget, SnowModelParams


class ConfigError(ValueError):
    """Invalid run configuration; message carries the key path."""


_NUMBER = (int, float)

# section -> key -> (default, expected types, allow_none)
_SCHEMA: dict[str, dict[str, tuple]] = {
    "": {
        "schema_version": (1, (int,), False),
        "seed": (0, (int,), False),
        "frames": (1, (int,), False),
        "output_dir": (".", (str,), False),
        "weather_csv": (None, (str,), True),
    },
    "waveform": {
        "header_degree": (13, (int,), False),
        "header_taps": (None, (list,), True),
        "header_seed": (None, (int,), True),
        "body_degree": (12, (int,), False),
        "body_taps": (None, (list,), True),
        "body_seed": (None, (int,), True),
        "repetitions": (16, (int,), False),
        "chip_duration_ns": (0.1, _NUMBER, False),
        "rolloff": (0.25, _NUMBER, False),
        "span_chips": (8, (int,), False),
        "samples_per_chip": (2, (int,), False),
        "if_frequency_hz": (0.0, _NUMBER, False),
    },
    "channel": {
        "scenario": (None, (str,), True),
        "taps": (None, (list,), True),
        "snr_db": (None, _NUMBER, True),
        "cfo_hz": (0.0, _NUMBER, False),
        "phase_offset_rad": (0.0, _NUMBER, False),
        "hardware_ripple": (False, (bool,), False),
        "hardware_ripple_seed": (7, (int,), False),
    },
    "analysis": {
        "dynamic_range_db": (60.0, _NUMBER, False),
        "resolution_ns": (0.1, _NUMBER, False),
        "sync_threshold": (0.25, _NUMBER, False),
        "delay_span_ns": (50.0, _NUMBER, True),
        "reference_dbm": (0.0, _NUMBER, False),
    },
    "noise_model": {
        "kind": ("thermal_plus_system", (str,), False),
        "bandwidth_hz": (20e9, _NUMBER, False),
        "temperature_k": (290.0, _NUMBER, False),
        "system_noise_floor_dbm": (-51.3, _NUMBER, False),
    },
    "budget": {
        "tx_power_dbm": (16.0, _NUMBER, False),
        "tx_gain_dbi": (38.0, _NUMBER, False),
        "rx_gain_dbi": (38.0, _NUMBER, False),
        "hw_gain_db": (0.0, _NUMBER, False),
        "hw_loss_db": (0.0, _NUMBER, False),
        "distance_m": (70.0, _NUMBER, False),
        "center_frequency_hz": (140e9, _NUMBER, False),
    },
    "snow": {
        "density_g_cm3": (0.52, _NUMBER, False),
        "terminal_velocity_m_s": (1.5, _NUMBER, False),
        "flake_mass_mg": (2.5, _NUMBER, False),
        "beam_diameter_m": (0.122, _NUMBER, False),
        "wetness": (None, _NUMBER, True),
    },
    "report": {
        "bandwidth_hz": (20e9, _NUMBER, False),
        "rows": ([], (list,), False),
    },
}

_TAP_KEYS = {"delay_ns", "power_db", "phase_deg"}
_ROW_KEYS = {"label", "snr_db", "received_power_dbm"}


def _validate_section(name: str, data: dict, schema: dict[str, tuple]) -> dict:
    prefix = f"{name}." if name else ""
    for key in data:
        if key not in schema:
            raise ConfigError(f"{prefix}{key}: unknown key")
    out = {}
    for key, (default, types, allow_none) in schema.items():
        if key in data:
            value = data[key]
            if value is None:
                if not allow_none:
                    raise ConfigError(f"{prefix}{key}: must not be null")
            elif not isinstance(value, types) or isinstance(value, bool) \
                    and bool not in types:
                raise ConfigError(
                    f"{prefix}{key}: expected "
                    f"{'/'.join(t.__name__ for t in types)}, "
                    f"got {type(value).__name__}")
            out[key] = value
        else:
            out[key] = default
    return out


@dataclass(frozen=True)
class RunConfig:
    root: dict = field(default_factory=dict)
    waveform: dict = field(default_factory=dict)
    channel: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    noise_model: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    snow: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.root["seed"]

    @property
    def frames(self) -> int:
        return self.root["frames"]


def parse_config(doc: dict, base_dir: str = ".") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a JSON object")
    known_sections = {k for k in _SCHEMA if k}
    root_data = {k: v for k, v in doc.items() if k not in known_sections}
    sections = {}
    for name in known_sections:
        value = doc.get(name, {})
        if not isinstance(value, dict):
            raise ConfigError(f"{name}: expected an object")
        sections[name] = _validate_section(name, value, _SCHEMA[name])
    root = _validate_section("", root_data, _SCHEMA[""])

    if root["frames"] < 1:
        raise ConfigError("frames: must be >= 1")
    chan = sections["channel"]
    if chan["scenario"] is not None \
            and chan["scenario"] not in SCENARIO_K_FACTOR_DB:
        raise ConfigError(f"channel.scenario: unknown scenario "
                          f"{chan['scenario']!r}")
    if chan["taps"] is not None:
        for i, tap in enumerate(chan["taps"]):
            if not isinstance(tap, dict) or not set(tap) <= _TAP_KEYS:
                raise ConfigError(f"channel.taps[{i}]: expected keys "
                                  f"{sorted(_TAP_KEYS)}")
            if "delay_ns" not in tap:
                raise ConfigError(f"channel.taps[{i}].delay_ns: required")
    for i, row in enumerate(sections["report"]["rows"]):
        if not isinstance(row, dict) or not set(row) <= _ROW_KEYS:
            raise ConfigError(f"report.rows[{i}]: expected keys "
                              f"{sorted(_ROW_KEYS)}")
        if ("snr_db" in row) == ("received_power_dbm" in row):
            raise ConfigError(f"report.rows[{i}]: give exactly one of "
                              f"snr_db or received_power_dbm")
    if root["weather_csv"] is not None:
        path = os.path.join(base_dir, root["weather_csv"])
        if not os.path.exists(path):
            raise ConfigError(f"weather_csv: file not found: {path}")
        root["weather_csv"] = path
    return RunConfig(root=root, waveform=sections["waveform"],
                     channel=sections["channel"],
                     analysis=sections["analysis"],
                     noise_model=sections["noise_model"],
                     budget=sections["budget"], snow=sections["snow"],
                     report=sections["report"])


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: "
                          f"invalid JSON ({exc.msg})") from exc
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def build_layout(cfg: RunConfig) -> FrameLayout:
    w = cfg.waveform
    header = generate_mseq(w["header_degree"],
                           tuple(w["header_taps"]) if w["header_taps"] else None,
                           w["header_seed"])
    body = generate_mseq(w["body_degree"],
                         tuple(w["body_taps"]) if w["body_taps"] else None,
                         w["body_seed"])
    return FrameLayout(header=header, body=body,
                       repetitions=w["repetitions"],
                       chip_duration_ns=float(w["chip_duration_ns"]))


def build_shape(cfg: RunConfig) -> PulseShape:
    w = cfg.waveform
    return PulseShape(rolloff=float(w["rolloff"]),
                      span_chips=w["span_chips"],
                      samples_per_chip=w["samples_per_chip"])


def build_noise_model(cfg: RunConfig) -> NoiseModel:
    n = cfg.noise_model
    return NoiseModel(kind=n["kind"], bandwidth_hz=float(n["bandwidth_hz"]),
                      temperature_k=float(n["temperature_k"]),
                      system_noise_floor_dbm=float(
                          n["system_noise_floor_dbm"]))


def build_budget(cfg: RunConfig) -> LinkBudget:
    b = cfg.budget
    return LinkBudget(tx_power_dbm=float(b["tx_power_dbm"]),
                      tx_gain_dbi=float(b["tx_gain_dbi"]),
                      rx_gain_dbi=float(b["rx_gain_dbi"]),
                      hw_gain_db=float(b["hw_gain_db"]),
                      hw_loss_db=float(b["hw_loss_db"]),
                      distance_m=float(b["distance_m"]),
                      center_frequency_hz=float(b["center_frequency_hz"]))


def build_snow_params(cfg: RunConfig, link_length_m: float) -> SnowModelParams:
    s = cfg.snow
    kwargs = dict(density_g_cm3=float(s["density_g_cm3"]),
                  terminal_velocity_m_s=float(s["terminal_velocity_m_s"]),
                  flake_mass_mg=float(s["flake_mass_mg"]),
                  beam_diameter_m=float(s["beam_diameter_m"]),
                  link_length_m=link_length_m)
    if s["wetness"] is not None:
        kwargs["wetness"] = float(s["wetness"])
    return SnowModelParams(**kwargs)


def config_taps(cfg: RunConfig):
    """Fixed tap list from the config, or None when scenario-driven."""
    from .channel import TapSet
    taps = cfg.channel["taps"]
    if taps is None:
        return None
    delays = np.array([float(t["delay_ns"]) for t in taps])
    gains = np.array([
        10.0 ** (float(t.get("power_db", 0.0)) / 20.0)
        * np.exp(1j * math.radians(float(t.get("phase_deg", 0.0))))
        for t in taps])
    return TapSet(delays, gains)

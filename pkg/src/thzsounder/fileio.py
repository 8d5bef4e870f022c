"""Capture container and report/record serialization.

Capture format (little-endian):
  bytes 0-7    magic b"THZCAP01"
  bytes 8-11   uint32 metadata length M
  bytes 12-..  M bytes of UTF-8 JSON metadata (sorted keys)
  remainder    float32 pairs, interleaved re/im samples

All writes are whole-file atomic (write temp, then rename).  Outputs carry
no timestamps so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

CAPTURE_MAGIC = b"THZCAP01"
CAPTURE_SCHEMA_VERSION = 1
RECORD_SCHEMA_VERSION = 1


class CaptureFormatError(ValueError):
    """Malformed or unsupported capture container."""


@dataclass(frozen=True, eq=False)
class CaptureFile:
    """Sample payload plus the self-describing run metadata."""

    metadata: dict
    samples: np.ndarray

    def __post_init__(self):
        md = self.metadata
        for key in ("schema_version", "sample_rate_hz"):
            if key not in md:
                raise CaptureFormatError(f"capture metadata missing {key!r}")
        if md["schema_version"] != CAPTURE_SCHEMA_VERSION:
            raise CaptureFormatError(
                f"unsupported capture schema version {md['schema_version']!r}")
        samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)


def _atomic_write(path: str, data: bytes) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _encode_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      allow_nan=True).encode("utf-8")


def write_capture(path: str, capture: CaptureFile) -> None:
    meta = _encode_json(capture.metadata)
    payload = np.empty(2 * capture.samples.size, dtype="<f4")
    payload[0::2] = capture.samples.real.astype(np.float32)
    payload[1::2] = capture.samples.imag.astype(np.float32)
    blob = (CAPTURE_MAGIC
            + np.uint32(len(meta)).tobytes()
            + meta
            + payload.tobytes())
    _atomic_write(path, blob)


def read_capture(path: str) -> CaptureFile:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:8] != CAPTURE_MAGIC:
        raise CaptureFormatError(f"{path}: not a capture file")
    meta_len = int(np.frombuffer(blob[8:12], dtype="<u4")[0])
    if len(blob) < 12 + meta_len:
        raise CaptureFormatError(f"{path}: truncated metadata block")
    metadata = json.loads(blob[12:12 + meta_len].decode("utf-8"))
    raw = np.frombuffer(blob[12 + meta_len:], dtype="<f4")
    if raw.size % 2:
        raise CaptureFormatError(f"{path}: odd payload length")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return CaptureFile(metadata=metadata, samples=samples)


def write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, sort_keys=True, indent=1,
                                   allow_nan=True).encode("utf-8") + b"\n")


def read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_tsv(path: str, columns: list[str], rows) -> None:
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(_format_cell(v) for v in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def read_tsv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty table")
    columns = lines[0].split("\t")
    rows = [ln.split("\t") for ln in lines[1:]]
    for r in rows:
        if len(r) != len(columns):
            raise ValueError(f"{path}: ragged row {r!r}")
    return columns, rows


def tapsets_to_records(tapsets, scenario: str) -> dict:
    frames = []
    for frame_id, ts in enumerate(tapsets):
        frames.append({
            "frame_id": frame_id,
            "scenario": scenario,
            "max_delay_ns": ts.max_delay_ns,
            "taps": [
                {"delay_ns": float(d),
                 "gain_re": float(g.real),
                 "gain_im": float(g.imag)}
                for d, g in zip(ts.delays_ns, ts.gains)],
        })
    return {"schema_version": RECORD_SCHEMA_VERSION, "frames": frames}


def records_to_tapsets(doc: dict):
    from .channel import TapSet
    if doc.get("schema_version") != RECORD_SCHEMA_VERSION:
        raise ValueError("unsupported tap record schema version")
    out = []
    for frame in doc["frames"]:
        delays = np.array([t["delay_ns"] for t in frame["taps"]])
        gains = np.array([t["gain_re"] + 1j * t["gain_im"]
                          for t in frame["taps"]])
        out.append(TapSet(delays, gains, max_delay_ns=frame["max_delay_ns"]))
    return out


WEATHER_CSV_COLUMNS = ("timestamp_s", "temperature_c", "water_vapor_g_m3",
                       "pressure_hpa", "precipitation_rate_mm_hr", "kind")


def read_weather_csv(path: str):
    """Weather time series with the documented column schema."""
    import csv

    from .weather import WeatherState
    states = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or \
                tuple(reader.fieldnames) != WEATHER_CSV_COLUMNS:
            raise ValueError(
                f"{path}: expected columns {','.join(WEATHER_CSV_COLUMNS)}, "
                f"got {reader.fieldnames}")
        for i, row in enumerate(reader):
            try:
                states.append(WeatherState(
                    temperature_c=float(row["temperature_c"]),
                    water_vapor_g_m3=float(row["water_vapor_g_m3"]),
                    pressure_hpa=float(row["pressure_hpa"]),
                    precipitation_rate_mm_hr=float(
                        row["precipitation_rate_mm_hr"]),
                    precipitation_kind=row["kind"].strip(),
                    timestamp_s=float(row["timestamp_s"])))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{i + 2}: bad weather row "
                                 f"({exc})") from exc
    if not states:
        raise ValueError(f"{path}: no weather rows")
    return states

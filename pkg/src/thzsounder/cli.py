"""Command-line pipeline: generate, simulate, analyze, weather, fit, report.

Exit codes: 0 success, 1 processing failure (e.g. no frame found), 2
configuration error.  Every run is deterministic under a fixed seed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import fileio
from .channel import (ImpairmentSet, TapSet, apply_channel,
                      default_hardware_response, synth_weather_taps)
from .fileio import CaptureFile
from .fitting import fit_normal, fit_rician, fit_stable
from .metrics import (delay_spread, empirical_cdf, k_factor, se_from_snr,
                      snr_se_capacity)
from .receiver import (CarrierLockError, FrameNotFoundError, build_calibration,
                       CalibrationProfile, process_frame, synchronize)
from .runconfig import (ConfigError, RunConfig, build_budget, build_layout,
                        build_noise_model, build_shape, build_snow_params,
                        config_taps, load_config)
from .waveform import BasebandSignal, frame_waveform
from .weather import link_budget_eval

EXIT_OK = 0
EXIT_PROCESSING = 1
EXIT_CONFIG = 2


def _capture_metadata(cfg: RunConfig, layout, shape, n_frames: int,
                      frame_stride: int, scenario) -> dict:
    w = cfg.waveform
    return {
        "schema_version": fileio.CAPTURE_SCHEMA_VERSION,
        "sample_rate_hz": layout.chip_rate_hz * shape.samples_per_chip,
        "if_frequency_hz": float(w["if_frequency_hz"]),
        "chip_duration_ns": layout.chip_duration_ns,
        "layout": {
            "header_degree": w["header_degree"],
            "header_taps": list(layout.header.taps),
            "header_seed": w["header_seed"],
            "body_degree": w["body_degree"],
            "body_taps": list(layout.body.taps),
            "body_seed": w["body_seed"],
            "repetitions": layout.repetitions,
        },
        "shape": {
            "rolloff": shape.rolloff,
            "span_chips": shape.span_chips,
            "samples_per_chip": shape.samples_per_chip,
        },
        "scenario": scenario,
        "seed": cfg.seed,
        "n_frames": n_frames,
        "frame_stride_samples": frame_stride,
    }


def _layout_from_metadata(md: dict):
    from .waveform import FrameLayout, PulseShape, generate_mseq
    lay = md["layout"]
    header = generate_mseq(lay["header_degree"], tuple(lay["header_taps"]),
                           lay["header_seed"])
    body = generate_mseq(lay["body_degree"], tuple(lay["body_taps"]),
                         lay["body_seed"])
    layout = FrameLayout(header=header, body=body,
                         repetitions=lay["repetitions"],
                         chip_duration_ns=md["chip_duration_ns"])
    sh = md["shape"]
    shape = PulseShape(rolloff=sh["rolloff"], span_chips=sh["span_chips"],
                       samples_per_chip=sh["samples_per_chip"])
    return layout, shape


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    layout = build_layout(cfg)
    shape = build_shape(cfg)
    tx = frame_waveform(layout, shape, cfg.waveform["if_frequency_hz"])
    out = args.out or os.path.join(cfg.root["output_dir"], "transmit.cap")
    meta = _capture_metadata(cfg, layout, shape, n_frames=1,
                             frame_stride=len(tx),
                             scenario=cfg.channel["scenario"])
    fileio.write_capture(out, CaptureFile(metadata=meta, samples=tx.samples))
    print(f"wrote {out}: {len(tx)} samples, "
          f"{layout.total_chips} chips per frame")
    return EXIT_OK


def _frame_tapsets(cfg: RunConfig, n_frames: int):
    fixed = config_taps(cfg)
    if fixed is not None:
        return [fixed] * n_frames
    scenario = cfg.channel["scenario"]
    if scenario is None:
        return [TapSet(np.array([0.0]), np.array([1.0 + 0j]))] * n_frames
    return [synth_weather_taps(scenario, cfg.seed * 1_000_003 + i)
            for i in range(n_frames)]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.frames is not None:
        cfg.root["frames"] = args.frames
    if args.scenario is not None:
        cfg.channel["scenario"] = args.scenario
    if args.seed is not None:
        cfg.root["seed"] = args.seed

    layout = build_layout(cfg)
    shape = build_shape(cfg)
    tx = frame_waveform(layout, shape, cfg.waveform["if_frequency_hz"])
    n_frames = cfg.frames
    tapsets = _frame_tapsets(cfg, n_frames)

    chan = cfg.channel
    hardware = None
    if chan["hardware_ripple"]:
        band = layout.chip_rate_hz * shape.samples_per_chip
        hardware = default_hardware_response(band,
                                             seed=chan["hardware_ripple_seed"])
    imp_clean = ImpairmentSet(cfo_hz=float(chan["cfo_hz"]),
                              phase_offset_rad=float(chan["phase_offset_rad"]),
                              snr_db=None, hardware_response=hardware)

    # frames are spaced by a guard interval longer than the channel memory
    # so every frame's multipath tail is flushed before the next header
    guard = 4096
    frame_stride = len(tx) + guard
    buf = np.zeros(n_frames * frame_stride, dtype=np.complex128)
    for i, ts in enumerate(tapsets):
        y = apply_channel(tx, ts, imp_clean, noise_seed=0)
        start = i * frame_stride
        seg = y.samples[:buf.size - start]
        buf[start:start + seg.size] += seg

    snr_db = chan["snr_db"]
    if snr_db is not None and math.isfinite(snr_db):
        # SNR referenced to the mean power over the active frame duration
        sig_power = float(np.sum(np.abs(buf) ** 2)) / (n_frames * len(tx))
        noise_var = sig_power * 10.0 ** (-float(snr_db) / 10.0)
        rng = np.random.default_rng(cfg.seed)
        buf = buf + (rng.standard_normal(buf.size)
                     + 1j * rng.standard_normal(buf.size)) \
            * math.sqrt(noise_var / 2.0)

    scenario = chan["scenario"]
    meta = _capture_metadata(cfg, layout, shape, n_frames, frame_stride,
                             scenario)
    meta["snr_db"] = snr_db
    meta["cfo_hz"] = float(chan["cfo_hz"])
    out = args.out or os.path.join(cfg.root["output_dir"], "received.cap")
    fileio.write_capture(out, CaptureFile(metadata=meta, samples=buf))
    truth_path = args.truth or os.path.join(cfg.root["output_dir"],
                                            "truth_taps.json")
    fileio.write_json(truth_path,
                      fileio.tapsets_to_records(tapsets,
                                                scenario or "custom"))
    print(f"wrote {out}: {n_frames} frame(s), {buf.size} samples")
    print(f"wrote {truth_path}")
    if hardware is not None:
        # measured calibration spectra for the frontend used in this run
        freqs, gain = hardware
        noise_power = 1e-9
        cal_path = os.path.join(os.path.dirname(os.path.abspath(out)),
                                "calibration_spectra.json")
        fileio.write_json(cal_path, {
            "schema_version": fileio.RECORD_SCHEMA_VERSION,
            "frequencies_hz": [float(f) for f in freqs],
            "tx_power": [1.0] * len(freqs),
            "rx_power": [float(abs(g) ** 2 + noise_power) for g in gain],
            "noise_power": noise_power})
        print(f"wrote {cal_path}")
    return EXIT_OK


def _load_calibration(path: str) -> CalibrationProfile:
    doc = fileio.read_json(path)
    return build_calibration(np.array(doc["frequencies_hz"]),
                             np.array(doc["rx_power"]),
                             np.array(doc["tx_power"]),
                             doc["noise_power"])


def cmd_analyze(args) -> int:
    cfg = load_config(args.config) if args.config else parse_default()
    capture = fileio.read_capture(args.capture)
    md = capture.metadata
    layout, shape = _layout_from_metadata(md)
    scenario = md.get("scenario") or "custom"
    n_frames = md.get("n_frames", 1)
    stride = md.get("frame_stride_samples")
    fs = md["sample_rate_hz"]
    signal = BasebandSignal(capture.samples, fs,
                            md.get("if_frequency_hz", 0.0))

    ana = cfg.analysis
    calibration = _load_calibration(args.calibration) \
        if args.calibration else None
    noise = build_noise_model(cfg)
    ref_dbm = float(ana["reference_dbm"])

    comp_rows, metric_rows = [], []
    k_samples, tau_samples = [], []
    guard = 8 * shape.samples_per_chip
    # anchor on the first frame, then slice the stream per frame so each
    # frame is processed in isolation (repetition windows never read the
    # following frame's header)
    first = synchronize(signal, layout.header, shape, layout.chip_rate_hz,
                        threshold=float(ana["sync_threshold"]),
                        search_start=0, search_length=stride)
    sync0 = first.offset
    samples = signal.samples
    for i in range(n_frames):
        if stride:
            base = sync0 + i * stride
            stop = samples.size if i == n_frames - 1 \
                else min(base + stride, samples.size)
            search_len = guard
        else:
            base, stop, search_len = 0, samples.size, None
        frame_sig = BasebandSignal(samples[base:stop], fs,
                                   signal.if_frequency_hz)
        result = process_frame(
            frame_sig, layout, shape, calibration=calibration,
            dynamic_range_db=float(ana["dynamic_range_db"]),
            resolution_ns=float(ana["resolution_ns"]),
            sync_threshold=float(ana["sync_threshold"]),
            search_start=0, search_length=search_len,
            delay_span_ns=ana["delay_span_ns"], frame_id=i)
        profile = result.profile
        for j, comp in enumerate(profile.components):
            comp_rows.append((i, scenario, j, comp.delay_ns,
                              comp.power_db + ref_dbm,
                              comp.amplitude.real, comp.amplitude.imag,
                              profile.noise_floor_db + ref_dbm))
        if not profile.components:
            # synchronized but nothing above the detection limit
            metric_rows.append((i, scenario, float("-inf"), float("nan"),
                                float("nan"), float("nan"), float("-inf"),
                                0.0, 0.0))
            continue
        rx_dbm = ref_dbm + 10.0 * math.log10(
            float(np.sum(profile.powers_linear)))
        kf = k_factor(profile)
        tau, mean_delay = delay_spread(profile)
        snr_db, se, cap = snr_se_capacity(rx_dbm, noise)
        metric_rows.append((i, scenario, rx_dbm, kf.k_db, tau, mean_delay,
                            snr_db, se, cap / 1e9))
        if not kf.single_component:
            k_samples.append(kf.k_db)
        tau_samples.append(tau)

    outdir = args.out or cfg.root["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    fileio.write_tsv(
        os.path.join(outdir, "components.tsv"),
        ["frame_id", "scenario", "component_index", "delay_ns", "power_dbm",
         "amplitude_re", "amplitude_im", "noise_floor_dbm"], comp_rows)
    fileio.write_tsv(
        os.path.join(outdir, "metrics.tsv"),
        ["frame_id", "scenario", "received_power_dbm", "k_factor_db",
         "rms_delay_spread_ns", "mean_delay_ns", "snr_db",
         "spectral_efficiency_bps_hz", "capacity_gbps"], metric_rows)

    fits = []
    if len(k_samples) >= 2:
        r = fit_normal(np.array(k_samples))
        fits.append({"metric": "k_factor_db", "scenario": scenario,
                     "family": r.family, "params": r.params,
                     "sample_count": r.sample_count,
                     "ks_statistic": r.ks_statistic, "flags": list(r.flags)})
    tau_arr = np.array([t for t in tau_samples if t > 0])
    if tau_arr.size >= 10:
        r = fit_rician(tau_arr)
        fits.append({"metric": "rms_delay_spread_ns", "scenario": scenario,
                     "family": r.family, "params": r.params,
                     "sample_count": r.sample_count,
                     "ks_statistic": r.ks_statistic, "flags": list(r.flags)})
    if tau_arr.size >= 100:
        r = fit_stable(tau_arr)
        fits.append({"metric": "rms_delay_spread_ns", "scenario": scenario,
                     "family": r.family, "params": r.params,
                     "sample_count": r.sample_count,
                     "ks_statistic": r.ks_statistic, "flags": list(r.flags)})
    fileio.write_json(os.path.join(outdir, "fits.json"),
                      {"schema_version": fileio.RECORD_SCHEMA_VERSION,
                       "fits": fits})

    if k_samples:
        fileio.write_tsv(os.path.join(outdir, "cdf_k_factor_db.tsv"),
                         ["value", "probability"],
                         empirical_cdf(k_samples).tolist())
    if tau_samples:
        fileio.write_tsv(os.path.join(outdir, "cdf_rms_delay_spread_ns.tsv"),
                         ["value", "probability"],
                         empirical_cdf(tau_samples).tolist())
    fileio.write_json(os.path.join(outdir, "run_meta.json"),
                      {"capture_metadata": md,
                       "frames_processed": n_frames,
                       "reference_dbm": ref_dbm,
                       "noise_model": cfg.noise_model})
    print(f"analyzed {n_frames} frame(s) -> {outdir}")
    return EXIT_OK


def parse_default() -> RunConfig:
    from .runconfig import parse_config
    return parse_config({})


def cmd_weather(args) -> int:
    cfg = load_config(args.config) if args.config else parse_default()
    csv_path = args.csv or cfg.root["weather_csv"]
    if not csv_path:
        raise ConfigError("weather command needs --csv or weather_csv in "
                          "the config")
    states = fileio.read_weather_csv(csv_path)
    budget = build_budget(cfg)
    snow = build_snow_params(cfg, budget.distance_m)
    rows = []
    for st in states:
        led = link_budget_eval(budget, st, snow_params=snow)
        rows.append((st.timestamp_s, st.precipitation_kind,
                     st.precipitation_rate_mm_hr, led.tx_power_dbm,
                     led.tx_gain_dbi, led.rx_gain_dbi, led.hw_gain_db,
                     led.hw_loss_db, led.fspl_db, led.gas_db, led.scatter_db,
                     led.received_dbm))
    out = args.out or os.path.join(cfg.root["output_dir"],
                                   "link_budget_series.tsv")
    fileio.write_tsv(out, ["timestamp_s", "kind", "rate_mm_hr",
                           "tx_power_dbm", "tx_gain_dbi", "rx_gain_dbi",
                           "hw_gain_db", "hw_loss_db", "fspl_db", "gas_db",
                           "scatter_db", "received_dbm"], rows)
    print(f"wrote {out}: {len(rows)} rows")
    return EXIT_OK


def cmd_fit(args) -> int:
    columns, rows = fileio.read_tsv(args.input)
    if args.column not in columns:
        raise ConfigError(f"column {args.column!r} not in {args.input} "
                          f"(have {columns})")
    j = columns.index(args.column)
    values = np.array([float(r[j]) for r in rows])
    finite = values[np.isfinite(values)]
    dropped = values.size - finite.size
    if args.family == "normal":
        r = fit_normal(finite)
    elif args.family == "rician":
        r = fit_rician(finite)
    elif args.family == "stable":
        r = fit_stable(finite)
    else:
        raise ConfigError(f"unknown family {args.family!r}")
    out = args.out or f"fit_{args.family}_{args.column}.json"
    fileio.write_json(out, {
        "schema_version": fileio.RECORD_SCHEMA_VERSION,
        "fits": [{"metric": args.column, "family": r.family,
                  "params": r.params, "sample_count": r.sample_count,
                  "ks_statistic": r.ks_statistic, "flags": list(r.flags),
                  "dropped_non_finite": dropped}]})
    print(f"wrote {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    rows = cfg.report["rows"]
    if not rows:
        raise ConfigError("report.rows: need at least one row")
    bw = float(cfg.report["bandwidth_hz"])
    out_rows = []
    for row in rows:
        label = row.get("label", "")
        if "snr_db" in row:
            snr = float(row["snr_db"])
            se = se_from_snr(snr)
            out_rows.append((label, "given", snr, se, se * bw / 1e9))
        else:
            for kind in ("thermal", "thermal_plus_system"):
                noise = build_noise_model(cfg)
                noise = type(noise)(kind=kind, bandwidth_hz=bw,
                                    temperature_k=noise.temperature_k,
                                    system_noise_floor_dbm=
                                    noise.system_noise_floor_dbm)
                snr, se, cap = snr_se_capacity(
                    float(row["received_power_dbm"]), noise)
                out_rows.append((label, kind, snr, se, cap / 1e9))
    out = args.out or os.path.join(cfg.root["output_dir"],
                                   "capacity_table.tsv")
    fileio.write_tsv(out, ["label", "noise_model", "snr_db",
                           "spectral_efficiency_bps_hz", "capacity_gbps"],
                     out_rows)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="thzsounder",
        description="Sliding-correlator channel-sounding simulation and "
                    "analysis toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write the transmit waveform capture")
    g.add_argument("--config", required=True)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="simulate received frames")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--truth")
    s.add_argument("--frames", type=int)
    s.add_argument("--scenario", choices=["clear", "rain", "snow"])
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="run the receiver over a capture")
    a.add_argument("--capture", required=True)
    a.add_argument("--config")
    a.add_argument("--out")
    a.add_argument("--calibration")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("weather", help="evaluate the link budget over a "
                                       "weather time series")
    w.add_argument("--csv")
    w.add_argument("--config")
    w.add_argument("--out")
    w.set_defaults(func=cmd_weather)

    f = sub.add_parser("fit", help="fit a distribution to a metrics column")
    f.add_argument("--input", required=True)
    f.add_argument("--column", required=True)
    f.add_argument("--family", required=True,
                   choices=["normal", "rician", "stable"])
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", help="compute SNR/SE/capacity rows")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FrameNotFoundError, CarrierLockError, fileio.CaptureFormatError,
            FileNotFoundError, ValueError) as exc:
        print(f"processing error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())

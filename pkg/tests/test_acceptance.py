"""Acceptance suite: one test per release criterion, tolerances pinned.

Run with `pytest -s tests/test_acceptance.py` to see one line per criterion.
"""

import hashlib
import json
import math
import os

import numpy as np
import pytest

from thzsounder.channel import (ImpairmentSet, TapSet, apply_channel,
                                default_hardware_response)
from thzsounder.cli import main as cli_main
from thzsounder.fitting import (fit_normal, fit_rician, fit_stable,
                                sample_rician, sample_stable)
from thzsounder.metrics import (delay_spread_from_arrays,
                                k_factor_from_powers, se_from_snr)
from thzsounder.receiver import (build_calibration, calibrate_signal,
                                 process_frame)
from thzsounder.waveform import BasebandSignal
from thzsounder.weather import (LinkBudget, SnowModelParams, WeatherState,
                                fspl, gas_attenuation, mie_extinction,
                                rain_attenuation, snow_attenuation,
                                snowflake_count)


def _report(num: int, text: str) -> None:
    print(f"\nPASS criterion {num:02d}: {text}")


def test_criterion_01_capacity_table():
    rows = [(51.30, 17.04, 340.83), (49.99, 16.61, 332.12),
            (37.96, 12.61, 252.20), (31.78, 10.56, 211.16),
            (30.47, 10.12, 202.46), (18.44, 6.15, 122.92)]
    for snr_db, se_expect, cap_expect in rows:
        se = se_from_snr(snr_db)
        cap_gbps = se * 20e9 / 1e9
        assert se == pytest.approx(se_expect, abs=0.01), snr_db
        assert cap_gbps == pytest.approx(cap_expect, abs=0.01), snr_db
    _report(1, "six SNR->SE/capacity rows reproduced within 0.01 at 20 GHz")


def test_criterion_02_frame_arithmetic(default_layout):
    assert default_layout.total_chips == 73_711
    duration_us = default_layout.frame_duration_ns / 1e3
    assert duration_us == pytest.approx(7.3711, abs=1e-9)
    assert default_layout.max_unambiguous_delay_ns == pytest.approx(409.5)
    doppler_hz = 1e9 / default_layout.frame_duration_ns
    assert abs(doppler_hz - 135.7e3) / 135.7e3 < 0.01
    assert abs(doppler_hz - 135.0e3) / 135.0e3 < 0.01
    _report(2, "73,711 chips, 7.3711 us frame, 409.5 ns span, "
               f"{doppler_hz/1e3:.1f} kHz rate limit")


def test_criterion_03_fspl_and_eirp():
    assert fspl(140e9, 70.0) == pytest.approx(112.27, abs=0.01)
    assert LinkBudget(tx_power_dbm=16.0, tx_gain_dbi=38.0).eirp_dbm == 54.0
    _report(3, "FSPL(140 GHz, 70 m) = 112.27 dB, EIRP ledger 54 dBm exact")


def test_criterion_04_snowflake_count():
    flakes = snowflake_count(0.45, SnowModelParams())
    assert 14.0 <= flakes <= 15.0
    _report(4, f"snowflake count {flakes:.2f} in [14, 15] at 0.45 mm/hr")


def test_criterion_05_weather_orders():
    clear = WeatherState(12.23, 5.15, 1026.0, 0.0, "none")
    rain = WeatherState(7.23, 7.09, 1014.0, 1.84, "rain")
    snow = WeatherState(-2.32, 3.54, 1020.0, 0.45, "snow")
    for st in (clear, rain, snow):
        assert gas_attenuation(st, 140e9, 70.0) <= 0.05
    rain_loss = rain_attenuation(1.84, 140e9, 70.0)
    assert 0.02 <= rain_loss <= 0.5
    params = SnowModelParams()
    snow_loss = snow_attenuation(0.45, params, 140e9)
    assert snow_loss == pytest.approx(13.0, abs=3.0)
    dip = snow_attenuation(4 * 0.45, params, 140e9) - snow_loss
    assert dip > 2.0
    _report(5, f"gas <= 0.05 dB, rain {rain_loss:.3f} dB, snow "
               f"{snow_loss:.2f} dB, 4x-rate dip {dip:.1f} dB")


def test_criterion_06_mie_properties():
    assert abs(mie_extinction(1.0 + 0j, 5.0)) < 1e-12
    chi, n = 0.05, 1.33
    q_rayleigh = (8 / 3) * chi ** 4 * abs((n ** 2 - 1) / (n ** 2 + 2)) ** 2
    assert mie_extinction(n + 0j, chi) == pytest.approx(q_rayleigh, rel=0.01)
    q100 = mie_extinction(1.33 + 0.01j, 100.0)
    assert q100 == pytest.approx(2.0, abs=0.3)
    _report(6, f"Q(n=1)=0, Rayleigh limit within 1%, Q(chi=100)={q100:.2f}")


def _random_los_tapset(rng, spacing_ns=0.2, dr_db=50.0, dmax_ns=40.0):
    n = int(rng.integers(2, 9))
    while True:
        rest = np.sort(rng.uniform(spacing_ns, dmax_ns, n - 1))
        if np.min(np.diff(np.concatenate([[0.0], rest]))) >= spacing_ns:
            break
    los = rng.uniform(0.0, 0.04)
    delays = np.concatenate([[los], los + rest])
    powers_db = np.concatenate([[0.0], rng.uniform(-dr_db, -0.5, n - 1)])
    phases = np.concatenate([[0.0], rng.uniform(0, 2 * np.pi, n - 1)])
    gains = 10 ** (powers_db / 20.0) * np.exp(1j * phases)
    return TapSet(delays, gains)


def test_criterion_07_end_to_end_loopback(default_layout, default_shape,
                                          default_tx):
    fs = default_tx.sample_rate_hz
    worst_delay = worst_power = worst_k = worst_tau = 0.0
    for trial in range(50):
        rng = np.random.default_rng(20_000 + trial)
        taps = _random_los_tapset(rng)
        cfo = rng.uniform(-1e5, 1e5)
        imp = ImpairmentSet(cfo_hz=cfo,
                            phase_offset_rad=rng.uniform(-np.pi, np.pi),
                            snr_db=30.0)
        rx = apply_channel(default_tx, taps, imp, noise_seed=trial)
        res = process_frame(rx, default_layout, default_shape,
                            delay_span_ns=45.0, frame_id=trial)
        absd = res.profile.delays_ns + res.sync_offset / fs * 1e9
        pdb = res.profile.powers_db

        for d, g in zip(taps.delays_ns, taps.gains):
            i = int(np.argmin(np.abs(absd - d)))
            derr = abs(absd[i] - d)
            perr = abs(pdb[i] - 20 * np.log10(abs(g)))
            worst_delay = max(worst_delay, derr)
            worst_power = max(worst_power, perr)
            assert derr <= 0.1, (trial, d)
            assert perr <= 0.5, (trial, d)

        k_true = k_factor_from_powers(taps.powers_linear).k_db
        k_est = k_factor_from_powers(res.profile.powers_linear).k_db
        worst_k = max(worst_k, abs(k_est - k_true))
        assert abs(k_est - k_true) <= 0.3, trial

        tau_true, _ = delay_spread_from_arrays(taps.delays_ns,
                                               taps.powers_linear)
        tau_est, _ = delay_spread_from_arrays(res.profile.delays_ns
                                              + res.sync_offset / fs * 1e9,
                                              res.profile.powers_linear)
        worst_tau = max(worst_tau, abs(tau_est - tau_true))
        assert abs(tau_est - tau_true) <= 0.05, trial
    _report(7, "50 seeded loopbacks: worst |delay err| "
               f"{worst_delay*1e3:.2f} ps, |power err| {worst_power:.3f} dB, "
               f"|K err| {worst_k:.3f} dB, |tau err| {worst_tau*1e3:.2f} ps")


def test_criterion_08_metric_oracles():
    tau, mean = delay_spread_from_arrays(np.array([7.5]), np.array([1.0]))
    assert tau == pytest.approx(0.0, abs=1e-6)
    tau, mean = delay_spread_from_arrays(np.array([0.0, 1.0]),
                                         np.array([1.0, 1.0]))
    assert tau == pytest.approx(0.5, abs=1e-6)
    assert mean == pytest.approx(0.5, abs=1e-6)
    tau, mean = delay_spread_from_arrays(np.array([0.0, 1.0]),
                                         np.array([1.0, 0.5]))
    assert tau == pytest.approx(0.4216370213557839, abs=1e-6)
    assert mean == pytest.approx(1.0 / 3.0, abs=1e-6)
    k = k_factor_from_powers(np.array([0.99, 0.01])).k_db
    assert k == pytest.approx(19.956351946, abs=1e-6)
    _report(8, "delay-spread hand values (0 / 0.5 / 0.4216 ns) and "
               "K = 19.956 dB reproduced to 1e-6")


def test_criterion_09_fitting_round_trips():
    rng = np.random.default_rng(42)
    r = fit_normal(rng.normal(35.2, math.sqrt(0.25), 10 ** 5))
    assert r.params["mu"] == pytest.approx(35.2, abs=0.01)
    assert r.params["sigma2"] == pytest.approx(0.25, abs=0.01)

    r = fit_rician(sample_rician(0.39, 0.048, 10 ** 5, rng))
    assert r.params["nu"] == pytest.approx(0.39, rel=0.05)
    assert r.params["sigma"] == pytest.approx(0.048, rel=0.05)
    r = fit_rician(sample_rician(0.0, 0.02, 10 ** 5, rng))
    assert r.params["nu"] < 0.5 * r.params["sigma"]
    assert r.params["sigma"] == pytest.approx(0.02, rel=0.05)

    r = fit_stable(rng.standard_normal(10 ** 5))
    assert 1.9 <= r.params["alpha"] <= 2.0
    assert abs(r.params["beta"]) <= 0.1
    assert r.params["gamma"] == pytest.approx(1 / math.sqrt(2), rel=0.05)
    r = fit_stable(rng.standard_cauchy(10 ** 5))
    assert 0.95 <= r.params["alpha"] <= 1.05
    assert abs(r.params["beta"]) <= 0.1
    r = fit_stable(sample_stable(1.07, 1.0, 0.0086, 0.28, 10 ** 5, rng))
    assert r.params["alpha"] == pytest.approx(1.07, abs=0.1)
    assert r.params["gamma"] == pytest.approx(0.0086, rel=0.15)
    _report(9, "normal/Rician/stable generate->fit recovery incl. "
               "Gaussian, Cauchy, and the heavy-tail reference row")


def test_criterion_10_calibration(small_layout, default_shape, small_tx):
    fs = small_tx.sample_rate_hz
    freqs, gain = default_hardware_response(fs, seed=11)
    distorted = apply_channel(
        small_tx, TapSet(np.array([0.0]), np.array([1.0 + 0j])),
        ImpairmentSet(hardware_response=(freqs, gain)))
    cal = build_calibration(freqs, np.abs(gain) ** 2 + 1e-9,
                            np.ones(freqs.size), 1e-9)
    restored = calibrate_signal(distorted, cal)
    spec_r = np.fft.fft(restored.samples[:len(small_tx)])
    spec_t = np.fft.fft(small_tx.samples)
    f = np.fft.fftfreq(len(small_tx), 1.0 / fs)
    band = np.abs(f) < 0.45 * fs / 2
    ratio_db = 20 * np.log10(np.abs(spec_r[band] / spec_t[band]))
    n = ratio_db.size - ratio_db.size % 40
    residual = float(np.ptp(ratio_db[:n].reshape(-1, 40).mean(axis=1)))
    assert residual < 0.2

    rng = np.random.default_rng(3)
    noise = BasebandSignal((rng.standard_normal(2 ** 16)
                            + 1j * rng.standard_normal(2 ** 16))
                           / np.sqrt(2), fs)
    elevated = calibrate_signal(noise, cal)
    elevation = 10 * math.log10(elevated.power() / noise.power())
    assert elevation == pytest.approx(10.0, abs=3.0)
    _report(10, f"ripple residual {residual:.3f} dB pk-pk, noise floor "
                f"elevated {elevation:.1f} dB")


def test_criterion_11_cli_determinism(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({
        "waveform": {"header_degree": 10, "body_degree": 9,
                     "repetitions": 8},
        "frames": 3, "seed": 9,
        "channel": {"scenario": "snow", "snr_db": 40.0, "cfo_hz": 3e4},
        "analysis": {"delay_span_ns": 35.0},
        "output_dir": str(tmp_path)}))

    def digest(path):
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()

    digests = []
    for tag in ("one", "two"):
        cap = str(tmp_path / f"rx_{tag}.cap")
        truth = str(tmp_path / f"truth_{tag}.json")
        outdir = str(tmp_path / f"out_{tag}")
        assert cli_main(["simulate", "--config", str(cfg_path), "--out", cap,
                         "--truth", truth]) == 0
        assert cli_main(["analyze", "--capture", cap, "--config",
                         str(cfg_path), "--out", outdir]) == 0
        entries = [digest(cap), digest(truth)]
        for name in sorted(os.listdir(outdir)):
            entries.append(digest(os.path.join(outdir, name)))
        digests.append(entries)
    assert digests[0] == digests[1]
    _report(11, "simulate+analyze reruns byte-identical under a fixed seed")

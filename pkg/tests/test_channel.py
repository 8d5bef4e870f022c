import numpy as np
import pytest
from scipy.stats import kurtosis

from thzsounder.channel import (SCENARIO_K_FACTOR_DB, ImpairmentSet, TapSet,
                                apply_channel, default_hardware_response,
                                synth_weather_taps)
from thzsounder.waveform import BasebandSignal

FS = 1e10


def _noise_signal(n, seed=1, fs=FS):
    rng = np.random.default_rng(seed)
    return BasebandSignal(rng.standard_normal(n) + 1j * rng.standard_normal(n),
                          fs)


class TestTapSet:
    def test_validation(self):
        with pytest.raises(ValueError):
            TapSet(np.array([]), np.array([]))
        with pytest.raises(ValueError):
            TapSet(np.array([-1.0]), np.array([1.0 + 0j]))
        with pytest.raises(ValueError):
            TapSet(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            TapSet(np.array([5.0, 1.0]), np.array([1.0, 1.0]))


class TestApplyChannel:
    def test_identity(self):
        x = _noise_signal(4096)
        y = apply_channel(x, TapSet(np.array([0.0]), np.array([1.0 + 0j])))
        assert np.max(np.abs(y.samples[:4096] - x.samples)) < 1e-12

    def test_shift_and_scale(self):
        # 20 ns at 10 GS/s is exactly 200 samples; oracle is a direct shift
        x = _noise_signal(4096)
        y = apply_channel(x, TapSet(np.array([20.0]), np.array([0.1 + 0j])))
        assert np.max(np.abs(y.samples[200:4296] - 0.1 * x.samples)) < 1e-12
        assert np.max(np.abs(y.samples[:200])) < 1e-12

    def test_energy_conservation_non_overlapping(self):
        # taps spaced beyond the burst length: copies do not overlap in time
        x = _noise_signal(100)
        taps = TapSet(np.array([0.0, 50.0, 120.0]),
                      np.array([1.0, 0.5j, -0.25 + 0.1j]))
        y = apply_channel(x, taps)
        expect = float(np.sum(np.abs(taps.gains) ** 2)) * x.energy()
        assert abs(y.energy() - expect) / expect < 1e-9

    def test_snr_calibration(self):
        rng = np.random.default_rng(0)
        x = BasebandSignal(np.exp(1j * rng.uniform(0, 2 * np.pi, 10 ** 6)), FS)
        y = apply_channel(x, TapSet(np.array([0.0]), np.array([1.0 + 0j])),
                          ImpairmentSet(snr_db=30.0), noise_seed=5)
        noise = y.samples[:10 ** 6] - x.samples
        var = float(np.var(noise))
        assert abs(var - 1e-3) / 1e-3 < 0.05
        assert 2.8 < kurtosis(noise.real, fisher=False) < 3.2
        assert 2.8 < kurtosis(noise.imag, fisher=False) < 3.2

    def test_noise_reproducibility(self):
        x = _noise_signal(2048)
        ts = TapSet(np.array([0.0]), np.array([1.0 + 0j]))
        y1 = apply_channel(x, ts, ImpairmentSet(snr_db=10.0), noise_seed=42)
        y2 = apply_channel(x, ts, ImpairmentSet(snr_db=10.0), noise_seed=42)
        y3 = apply_channel(x, ts, ImpairmentSet(snr_db=10.0), noise_seed=43)
        assert np.array_equal(y1.samples, y2.samples)
        assert not np.array_equal(y1.samples, y3.samples)

    def test_cfo_phase_ramp(self):
        x = _noise_signal(5000)
        y = apply_channel(x, TapSet(np.array([0.0]), np.array([1.0 + 0j])),
                          ImpairmentSet(cfo_hz=1e5, phase_offset_rad=0.3))
        phase = np.unwrap(np.angle(y.samples[:5000] / x.samples))
        t = np.arange(5000) / FS
        slope, intercept = np.polyfit(t, phase, 1)
        assert abs(slope / (2 * np.pi) - 1e5) / 1e5 < 1e-6
        assert intercept == pytest.approx(0.3, abs=1e-9)

    def test_aliased_delay_flag(self):
        x = _noise_signal(256)
        ts = TapSet(np.array([500.0]), np.array([1.0 + 0j]),
                    max_delay_ns=409.5)
        with pytest.warns(RuntimeWarning, match="alias"):
            y = apply_channel(x, ts)
        assert "aliased_profile" in y.flags

    def test_hardware_response_flat_gain(self):
        x = _noise_signal(2048)
        freqs = np.linspace(-FS / 2, FS / 2, 64)
        hw = (freqs, np.full(64, 0.5 + 0j))
        y = apply_channel(x, TapSet(np.array([0.0]), np.array([1.0 + 0j])),
                          ImpairmentSet(hardware_response=hw))
        assert np.max(np.abs(y.samples[:2048] - 0.5 * x.samples)) < 1e-9


class TestSynthWeatherTaps:
    def test_unknown_scenario(self):
        with pytest.raises(ValueError, match="unknown scenario"):
            synth_weather_taps("hail", 0)

    def test_determinism(self):
        a = synth_weather_taps("clear", 42)
        b = synth_weather_taps("clear", 42)
        assert np.array_equal(a.delays_ns, b.delays_ns)
        assert np.array_equal(a.gains, b.gains)

    def test_structure(self):
        ts = synth_weather_taps("rain", 3)
        assert ts.delays_ns[0] == 0.0
        assert abs(ts.gains[0]) == 1.0
        assert np.all(ts.delays_ns[1:] > 15.0)
        assert np.all(ts.delays_ns[1:] < 30.0)

    @pytest.mark.parametrize("scenario", ["clear", "rain", "snow"])
    def test_k_factor_statistics(self, scenario):
        mean_db, var_db = SCENARIO_K_FACTOR_DB[scenario]
        ks = []
        for seed in range(300):
            ts = synth_weather_taps(scenario, seed)
            p = ts.powers_linear
            ks.append(10 * np.log10(p.max() / (p.sum() - p.max())))
        assert np.mean(ks) == pytest.approx(mean_db, abs=0.15)
        assert np.std(ks) == pytest.approx(np.sqrt(var_db), abs=0.15)

    def test_snow_cluster_weaker_than_clear(self):
        def cluster_power(scenario):
            total = 0.0
            for seed in range(200):
                ts = synth_weather_taps(scenario, seed)
                total += float(np.sum(ts.powers_linear[1:]))
            return total / 200
        assert cluster_power("snow") > 2.0 * cluster_power("clear")


class TestDefaultHardwareResponse:
    def test_ripple_and_edges(self):
        freqs, gain = default_hardware_response(1e10, seed=7)
        mag_db = 20 * np.log10(np.abs(gain))
        inner = np.abs(freqs) < 0.2 * 1e10
        assert np.max(np.abs(mag_db[inner])) <= 3.0 + 1e-9
        assert np.abs(gain[0]) == pytest.approx(0.04, rel=0.05)
        assert np.abs(gain[-1]) == pytest.approx(0.04, rel=0.05)

    def test_seeded(self):
        a = default_hardware_response(1e10, seed=1)
        b = default_hardware_response(1e10, seed=1)
        c = default_hardware_response(1e10, seed=2)
        assert np.array_equal(a[1], b[1])
        assert not np.array_equal(a[1], c[1])

import math

import numpy as np
import pytest

from thzsounder.metrics import (ChannelMetrics, NoiseModel, delay_spread,
                                delay_spread_from_arrays, empirical_cdf,
                                k_factor, k_factor_from_powers, se_from_snr,
                                snr_se_capacity)
from thzsounder.receiver import MpcComponent, MpcProfile


def _profile(delays, powers_linear):
    comps = tuple(
        MpcComponent(delay_ns=d, power_db=10 * math.log10(p),
                     amplitude=complex(math.sqrt(p)))
        for d, p in zip(delays, powers_linear))
    return MpcProfile(components=comps, noise_floor_db=-90.0,
                      dynamic_range_db=120.0)


class TestKFactor:
    def test_hand_example(self):
        # {0.99, 0.01} linear: K = 10*log10(99) = 19.956352 dB
        res = k_factor_from_powers(np.array([0.99, 0.01]))
        assert res.k_db == pytest.approx(19.956351946, abs=1e-6)
        assert not res.single_component

    def test_single_component_flag(self):
        res = k_factor_from_powers(np.array([0.5]))
        assert math.isinf(res.k_db)
        assert res.single_component

    def test_scale_invariance_exact(self):
        p = np.array([0.7, 0.02, 0.005])
        base = k_factor_from_powers(p).k_db
        for scale in (2.0, 0.25, 1024.0):
            assert k_factor_from_powers(p * scale).k_db == base

    def test_profile_interface(self):
        prof = _profile([0.0, 20.0], [0.99, 0.01])
        assert k_factor(prof).k_db == pytest.approx(19.956351946, abs=1e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            k_factor_from_powers(np.array([]))
        with pytest.raises(ValueError):
            k_factor_from_powers(np.array([1.0, 0.0]))


class TestDelaySpread:
    def test_single_path(self):
        tau, mean = delay_spread_from_arrays(np.array([7.5]), np.array([1.0]))
        assert tau == 0.0
        assert mean == 7.5

    def test_two_equal_paths(self):
        tau, mean = delay_spread_from_arrays(np.array([0.0, 1.0]),
                                             np.array([1.0, 1.0]))
        assert mean == pytest.approx(0.5, abs=1e-12)
        assert tau == pytest.approx(0.5, abs=1e-12)

    def test_hand_example_squared_weights(self):
        # (0 ns, p=1.0), (1 ns, p=0.5):
        #   mean = 0.5/1.5 = 1/3
        #   tau = sqrt((1/9*1 + 4/9*1/4) / 1.25) = 0.4216370
        tau, mean = delay_spread_from_arrays(np.array([0.0, 1.0]),
                                             np.array([1.0, 0.5]))
        assert mean == pytest.approx(1.0 / 3.0, abs=1e-9)
        assert tau == pytest.approx(0.4216370213557839, abs=1e-6)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = rng.integers(2, 8)
            d = np.sort(rng.uniform(0, 50, n))
            p = rng.uniform(0.01, 1.0, n)
            mean_ref = sum(di * pi for di, pi in zip(d, p)) / sum(p)
            num = sum((di - mean_ref) ** 2 * pi * pi
                      for di, pi in zip(d, p))
            tau_ref = math.sqrt(num / sum(pi * pi for pi in p))
            tau, mean = delay_spread_from_arrays(d, p)
            assert mean == pytest.approx(mean_ref, rel=1e-12)
            assert tau == pytest.approx(tau_ref, rel=1e-12)

    def test_linear_weighting_switch(self):
        d = np.array([0.0, 1.0])
        p = np.array([1.0, 0.5])
        tau_lin, mean = delay_spread_from_arrays(d, p, weighting="linear")
        expect = math.sqrt(((0 - 1 / 3) ** 2 * 1.0 + (1 - 1 / 3) ** 2 * 0.5)
                           / 1.5)
        assert tau_lin == pytest.approx(expect, rel=1e-12)
        assert mean == pytest.approx(1 / 3, rel=1e-12)

    def test_zero_iff_single_and_bounded(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            n = int(rng.integers(2, 10))
            d = np.sort(rng.uniform(0, 100, n))
            p = rng.uniform(0.01, 1.0, n)
            tau, _ = delay_spread_from_arrays(d, p)
            assert tau > 0.0
            assert tau <= d.max() - d.min()

    def test_scale_invariance_exact(self):
        d = np.array([0.0, 5.0, 9.0])
        p = np.array([1.0, 0.25, 0.03125])
        base = delay_spread_from_arrays(d, p)
        scaled = delay_spread_from_arrays(d, p * 8.0)
        assert base == scaled

    def test_profile_interface(self):
        prof = _profile([0.0, 1.0], [1.0, 0.5])
        tau, mean = delay_spread(prof)
        assert tau == pytest.approx(0.4216370213557839, abs=1e-6)
        assert mean == pytest.approx(1 / 3, abs=1e-9)


TABLE_ROWS = [
    # (snr_db, se, capacity_gbps) at B = 20 GHz
    (51.30, 17.04, 340.83),
    (49.99, 16.61, 332.12),
    (37.96, 12.61, 252.20),
    (31.78, 10.56, 211.16),
    (30.47, 10.12, 202.46),
    (18.44, 6.15, 122.92),
]


class TestSnrSeCapacity:
    @pytest.mark.parametrize("snr_db,se,cap_gbps", TABLE_ROWS)
    def test_reference_rows(self, snr_db, se, cap_gbps):
        got = se_from_snr(snr_db)
        assert got == pytest.approx(se, abs=0.01)
        assert got * 20e9 / 1e9 == pytest.approx(cap_gbps, abs=0.01)

    def test_zero_db_exact(self):
        assert se_from_snr(0.0) == pytest.approx(1.0, abs=1e-12)

    def test_thermal_noise_power(self):
        noise = NoiseModel(kind="thermal", bandwidth_hz=20e9)
        # kTB at 290 K over 20 GHz is about -71 dBm
        assert noise.noise_power_dbm() == pytest.approx(-71.0, abs=0.1)

    def test_combined_noise_dominated_by_system_floor(self):
        noise = NoiseModel(kind="thermal_plus_system", bandwidth_hz=20e9)
        assert noise.noise_power_dbm() == pytest.approx(-51.3, abs=0.1)

    def test_combined_snr_never_exceeds_thermal(self):
        thermal = NoiseModel(kind="thermal", bandwidth_hz=20e9)
        combined = NoiseModel(kind="thermal_plus_system", bandwidth_hz=20e9)
        for p in np.linspace(-60, 0, 25):
            snr_t, _, _ = snr_se_capacity(p, thermal)
            snr_c, _, _ = snr_se_capacity(p, combined)
            assert snr_c <= snr_t

    def test_capacity_se_consistency(self):
        noise = NoiseModel(kind="thermal", bandwidth_hz=13.7e9)
        for p in (-80.0, -40.0, -10.0):
            _, se, cap = snr_se_capacity(p, noise)
            assert cap / noise.bandwidth_hz == pytest.approx(se, rel=1e-12)

    def test_noise_model_validation(self):
        with pytest.raises(ValueError):
            NoiseModel(kind="cosmic")
        with pytest.raises(ValueError):
            NoiseModel(bandwidth_hz=0.0)

    def test_channel_metrics_validation(self):
        with pytest.raises(ValueError):
            ChannelMetrics(received_power_dbm=-20, k_factor_db=30,
                           rms_delay_spread_ns=-1, mean_delay_ns=0,
                           snr_db=50, spectral_efficiency=10,
                           capacity_bps=2e11)


class TestEmpiricalCdf:
    def test_single_sample(self):
        assert empirical_cdf([5.0]).tolist() == [[5.0, 1.0]]

    def test_two_samples(self):
        assert empirical_cdf([2.0, 1.0]).tolist() == [[1.0, 0.5], [2.0, 1.0]]

    def test_standard_normal_median(self):
        rng = np.random.default_rng(4)
        cdf = empirical_cdf(rng.standard_normal(10 ** 4))
        values, probs = cdf[:, 0], cdf[:, 1]
        at_zero = probs[np.searchsorted(values, 0.0)]
        assert at_zero == pytest.approx(0.5, abs=0.02)

    def test_monotone_and_terminates_at_one(self):
        rng = np.random.default_rng(5)
        cdf = empirical_cdf(rng.uniform(size=257))
        assert np.all(np.diff(cdf[:, 1]) > 0)
        assert cdf[-1, 1] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_cdf([])

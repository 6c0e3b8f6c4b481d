"""Closed-form SINR, CQI, and ground-truth oracles vs independent arithmetic."""

import numpy as np
import pytest

from uwacr.chanmodel import DiscreteChannel
from uwacr.oracle import (
    GroundTruth,
    SingularChannelError,
    SinrReport,
    compute_cqi,
    default_beacon,
    equalize,
    ground_truth,
    interference_covariance_diag,
    monte_carlo_sinr,
    packet_rate,
    sinr_report,
    subcarrier_sinr,
)
from uwacr.phy import InterfererSpec, build_circulant, unitary_dft

from conftest import identity_channel, two_tap_channel


class TestEqualize:
    def test_noise_variance_after_zero_forcing(self, ofdm64):
        # ZF divides by D_k, so noise power per bin comes out sigma2 / |D_k|^2
        ch = two_tap_channel(ofdm64)
        circ = build_circulant(ch, 64)
        sigma2 = 0.3
        rng = np.random.default_rng(21)
        n_draws = 10_000
        noise = np.sqrt(sigma2 / 2) * (
            rng.standard_normal((n_draws, 64)) + 1j * rng.standard_normal((n_draws, 64))
        )
        acc = np.zeros(64)
        for row in noise:
            acc += np.abs(equalize(row, circ, bins=ofdm64.occupied_bins)) ** 2
        emp = acc / n_draws
        expect = sigma2 / np.abs(circ.diag) ** 2
        bins = ofdm64.occupied_bins
        assert np.max(np.abs(emp[bins] - expect[bins]) / expect[bins]) <= 0.03

    def test_singular_bin_rejected(self, ofdm64):
        # h = [1, 0...0, -1] nulls every even bin of the 64-point DFT
        h = np.zeros(17, dtype=complex)
        h[0], h[-1] = 1.0, -1.0
        circ = build_circulant(DiscreteChannel(h, ofdm64.sample_period), 64)
        with pytest.raises(SingularChannelError):
            equalize(np.ones(64, dtype=complex), circ)
        # restricting the check to nonsingular bins lets it through
        odd = np.arange(1, 64, 2)
        equalize(np.ones(64, dtype=complex), circ, bins=odd)

    def test_global_phase_invariance(self, ofdm64):
        rng = np.random.default_rng(22)
        ch = two_tap_channel(ofdm64)
        rotated = DiscreteChannel(ch.h * np.exp(1j * 0.77), ofdm64.sample_period)
        y = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        out_a = equalize(y, build_circulant(ch, 64))
        out_b = equalize(y * np.exp(1j * 0.77), build_circulant(rotated, 64))
        np.testing.assert_allclose(out_a, out_b, atol=1e-12)


class TestSinrReport:
    def test_identity_channel_no_interferers(self, ofdm64):
        ch = identity_channel(ofdm64)
        rep = sinr_report(ch, ofdm64.rb_bins[0], power=1.0, interferers=[],
                          sigma2=0.1, ofdm=ofdm64)
        np.testing.assert_allclose(rep.sinr, 10.0, atol=1e-12)
        assert rep.sinr.shape == (ofdm64.symbols_per_packet, 10)

    def test_no_interferer_equals_snr_formula(self, ofdm64):
        ch = two_tap_channel(ofdm64)
        alloc = ofdm64.rb_bins[2]
        rep = sinr_report(ch, alloc, power=2.0, interferers=[], sigma2=0.4, ofdm=ofdm64)
        diag = np.fft.fft(ch.h, 64)
        np.testing.assert_allclose(rep.sinr[0], 2.0 * np.abs(diag[alloc]) ** 2 / 0.4, rtol=1e-12)

    def test_rows_identical_across_packet(self, ofdm64):
        ch = two_tap_channel(ofdm64)
        spec = InterfererSpec(channel=ch, gap=23, alloc=ofdm64.rb_bins[1], power=1.0)
        rep = sinr_report(ch, ofdm64.rb_bins[0], 1.0, [spec], 0.1, ofdm64)
        for row in rep.sinr[1:]:
            np.testing.assert_array_equal(row, rep.sinr[0])

    def test_packet_rate_frozen_example(self, ofdm64):
        rep = SinrReport(np.arange(4), np.array([[1.0, 3.0, 7.0, 15.0]]))
        assert packet_rate(rep) == pytest.approx(2.5, abs=1e-12)

    def test_subcarrier_sinr_identity(self, ofdm64):
        ch = identity_channel(ofdm64)
        assert subcarrier_sinr(5, ch, 1.0, [], 0.1, ofdm64) == pytest.approx(10.0)

    def test_singular_victim_rejected(self, ofdm64):
        h = np.zeros(17, dtype=complex)
        h[0], h[-1] = 1.0, -1.0  # nulls even bins
        ch = DiscreteChannel(h, ofdm64.sample_period)
        with pytest.raises(SingularChannelError):
            sinr_report(ch, np.array([0]), 1.0, [], 0.1, ofdm64)

    def test_global_phase_invariance(self, ofdm64):
        ch = two_tap_channel(ofdm64)
        rot = DiscreteChannel(ch.h * np.exp(1j * 1.3), ofdm64.sample_period)
        spec = InterfererSpec(channel=two_tap_channel(ofdm64, 0.3), gap=11,
                              alloc=ofdm64.rb_bins[1], power=1.0)
        a = sinr_report(ch, ofdm64.rb_bins[0], 1.0, [spec], 0.2, ofdm64)
        b = sinr_report(rot, ofdm64.rb_bins[0], 1.0, [spec], 0.2, ofdm64)
        np.testing.assert_allclose(a.sinr, b.sinr, rtol=1e-12)


class TestInterferenceCovariance:
    def test_stationary_across_symbol_shifts(self, ofdm64):
        spec = InterfererSpec(channel=two_tap_channel(ofdm64), gap=37,
                              alloc=ofdm64.rb_bins[2], power=1.5)
        a = interference_covariance_diag([spec], ofdm64, window_start=16)
        b = interference_covariance_diag([spec], ofdm64, window_start=16 + ofdm64.n_sym)
        np.testing.assert_allclose(a, b, rtol=1e-10)

    def test_additive_over_interferers(self, ofdm64):
        s1 = InterfererSpec(channel=two_tap_channel(ofdm64), gap=9,
                            alloc=ofdm64.rb_bins[1], power=1.0)
        s2 = InterfererSpec(channel=two_tap_channel(ofdm64, 0.2), gap=41,
                            alloc=ofdm64.rb_bins[3], power=0.7)
        both = interference_covariance_diag([s1, s2], ofdm64, 16)
        solo = (interference_covariance_diag([s1], ofdm64, 16)
                + interference_covariance_diag([s2], ofdm64, 16))
        np.testing.assert_allclose(both, solo, rtol=1e-12)

    def test_power_scales_linearly(self, ofdm64):
        weak = InterfererSpec(channel=two_tap_channel(ofdm64), gap=13,
                              alloc=ofdm64.rb_bins[1], power=1.0)
        strong = InterfererSpec(channel=two_tap_channel(ofdm64), gap=13,
                                alloc=ofdm64.rb_bins[1], power=4.0)
        np.testing.assert_allclose(
            interference_covariance_diag([strong], ofdm64, 16),
            4.0 * interference_covariance_diag([weak], ofdm64, 16), rtol=1e-12)

    def test_added_interferer_never_raises_sinr(self, ofdm64):
        ch = two_tap_channel(ofdm64)
        s1 = InterfererSpec(channel=two_tap_channel(ofdm64, 0.4), gap=29,
                            alloc=ofdm64.rb_bins[1], power=1.0)
        s2 = InterfererSpec(channel=two_tap_channel(ofdm64, 0.6), gap=3,
                            alloc=ofdm64.rb_bins[2], power=1.0)
        alloc = ofdm64.rb_bins[0]
        one = sinr_report(ch, alloc, 1.0, [s1], 0.1, ofdm64).sinr[0]
        two = sinr_report(ch, alloc, 1.0, [s1, s2], 0.1, ofdm64).sinr[0]
        assert np.all(two <= one + 1e-15)
        assert two.min() < one.min()  # the new neighbor actually bites


class TestClosedFormVsMonteCarlo:
    def test_identity_channel_matches_exactly(self, ofdm64):
        ch = identity_channel(ofdm64)
        alloc = ofdm64.rb_bins[0]
        mc = monte_carlo_sinr(ch, alloc, 1.0, [], 0.5, ofdm64, n_trials=4000, seed=31)
        np.testing.assert_allclose(mc, 2.0, rtol=0.05)

    def test_two_interferers_random_gaps(self, ofdm64):
        rng = np.random.default_rng(32)
        ch = two_tap_channel(ofdm64)
        specs = [
            InterfererSpec(channel=two_tap_channel(ofdm64, 0.5), gap=int(rng.integers(1, 80)),
                           alloc=ofdm64.rb_bins[1], power=1.0),
            InterfererSpec(channel=two_tap_channel(ofdm64, 0.3), gap=int(rng.integers(1, 80)),
                           alloc=ofdm64.rb_bins[4], power=1.0),
        ]
        alloc = ofdm64.rb_bins[0]
        closed = sinr_report(ch, alloc, 1.0, specs, 0.2, ofdm64).sinr[0]
        mc = monte_carlo_sinr(ch, alloc, 1.0, specs, 0.2, ofdm64, n_trials=4000, seed=33)
        assert np.max(np.abs(mc - closed) / closed) <= 0.05


class TestCqi:
    def test_identity_channel_frozen_value(self, ofdm64):
        beacon = default_beacon(ofdm64)
        cqi = compute_cqi(beacon, identity_channel(ofdm64), sigma2=0.5, ofdm=ofdm64)
        np.testing.assert_allclose(cqi, 2.0, atol=1e-12)

    def test_matches_dense_dft_arithmetic(self, ofdm64):
        # independent route: evaluate the DFT sum directly per bin
        ch = two_tap_channel(ofdm64)
        beacon = default_beacon(ofdm64)
        got = compute_cqi(beacon, ch, sigma2=0.25, ofdm=ofdm64)
        n = 64
        for r, bins in enumerate(ofdm64.rb_bins):
            acc = 0.0
            for k in bins:
                d = sum(ch.h[l] * np.exp(-2j * np.pi * k * l / n) for l in range(len(ch.h)))
                acc += abs(d) ** 2 / 0.25
            assert got[r] == pytest.approx(acc / bins.size, rel=1e-12)

    def test_blind_to_interference_by_construction(self, ofdm64):
        # the oracle CQI takes no interferer argument; sanity-pin its scaling
        ch = two_tap_channel(ofdm64)
        beacon = default_beacon(ofdm64)
        a = compute_cqi(beacon, ch, sigma2=0.5, ofdm=ofdm64)
        b = compute_cqi(beacon, ch, sigma2=1.0, ofdm=ofdm64)
        np.testing.assert_allclose(a, 2.0 * b, rtol=1e-12)

    def test_beacon_must_cover_band(self, ofdm64):
        beacon = default_beacon(ofdm64)
        partial = type(beacon)(beacon.pilots, beacon.bins[:30], beacon.power)
        with pytest.raises(ValueError, match="cover"):
            compute_cqi(partial, identity_channel(ofdm64), 0.5, ofdm64)

    def test_default_beacon_shape(self, ofdm64):
        beacon = default_beacon(ofdm64, power=2.0)
        assert np.array_equal(beacon.bins, ofdm64.occupied_bins)
        np.testing.assert_allclose(np.abs(beacon.pilots[beacon.bins]), np.sqrt(2.0), atol=1e-12)
        again = default_beacon(ofdm64, power=2.0)
        assert np.array_equal(beacon.pilots, again.pilots)


class TestGroundTruth:
    def test_availability_mirrors_occupancy(self, ofdm64):
        ch = identity_channel(ofdm64)
        occupied = np.array([True, False, True, False, False])
        gt = ground_truth(occupied, ch, [], 0.5, ofdm64)
        assert gt.v_rb.tolist() == [0, 1, 0, 1, 1]
        assert np.all(gt.v_rate[occupied] == 0)
        np.testing.assert_allclose(gt.v_rate[~occupied], np.log2(3.0), atol=1e-12)

    def test_rates_match_sinr_report(self, ofdm64):
        ch = two_tap_channel(ofdm64)
        spec = InterfererSpec(channel=two_tap_channel(ofdm64, 0.4), gap=19,
                              alloc=ofdm64.rb_bins[2], power=1.0)
        gt = ground_truth(np.array([False, False, True, False, False]), ch, [spec],
                          0.2, ofdm64)
        for r in (0, 1, 3, 4):
            rep = sinr_report(ch, ofdm64.rb_bins[r], 1.0, [spec], 0.2, ofdm64, n_symbols=1)
            assert gt.v_rate[r] == pytest.approx(rep.rate, rel=1e-12)

    def test_mask_length_checked(self, ofdm64):
        with pytest.raises(ValueError, match="n_rb"):
            ground_truth(np.zeros(3, bool), identity_channel(ofdm64), [], 0.5, ofdm64)

    def test_dataclass_invariants(self):
        with pytest.raises(ValueError, match="zero rate"):
            GroundTruth(np.array([0, 1]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError, match="0/1"):
            GroundTruth(np.array([2, 1]), np.array([0.0, 1.0]))
        gt = GroundTruth(np.array([0, 1]), np.array([0.0, 2.0]))
        assert gt.any_free and gt.best_rb == 1
        empty = GroundTruth(np.array([0, 0]), np.array([0.0, 0.0]))
        assert not empty.any_free

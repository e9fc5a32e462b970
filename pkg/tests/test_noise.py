import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlispec.errors import ConfigurationError
from nlispec.forward import AcquisitionConfig, Interferogram, simulate_burst
from nlispec.noise import (
    AllanCurve,
    FluxCalibration,
    FrameSeries,
    allan_deviation,
    allan_deviation_values,
    block_average,
    estimate_photon_flux,
    extrapolate_brightness,
    fit_scaling_exponent,
    pairwise_residuals,
    residual_std,
    snr_scan,
)
from nlispec.spectral import AxisKind, Spectrum


def white(n_frames=1024, n_points=50, sigma=0.01, seed=0):
    rng = np.random.default_rng(seed)
    return FrameSeries(1.0 + sigma * rng.standard_normal((n_frames, n_points)), np.arange(1.0, n_points + 1), 0.01)


class TestResiduals:
    def test_identical_frames(self):
        s = FrameSeries(np.ones((5, 10)), np.arange(1.0, 11.0), 0.01)
        assert all(np.all(r.values == 0) for r in pairwise_residuals(s, ()))

    def test_plus_minus_epsilon(self):
        eps = 0.01
        s = FrameSeries(np.vstack([np.full(10, 1 + eps), np.full(10, 1 - eps)]), np.arange(1.0, 11.0), 0.01)
        (r,) = pairwise_residuals(s, ())
        assert np.allclose(r.values, -2 * eps / 1.0)

    def test_exclusion_masked(self):
        axis = np.linspace(2800, 3050, 100)
        s = FrameSeries(1 + 0.01 * np.random.default_rng(1).standard_normal((4, 100)), axis, 0.01)
        r = pairwise_residuals(s)
        inside = (axis >= 2850) & (axis <= 2925)
        assert np.all(np.isnan(r[0].values[inside])) and np.all(np.isfinite(r[0].values[~inside]))


class TestAllan:
    def test_constant(self):
        curve = allan_deviation(FrameSeries.from_scalars(np.full(64, 3.0), 0.01), [0.01, 0.02, 0.04])
        assert np.all(curve.sigma_a == 0)

    def test_alternating_exact(self):
        y = np.tile([1.0, 3.0], 32)
        assert allan_deviation_values(y, 1)[0] == np.sqrt(2.0)
        curve = allan_deviation(FrameSeries.from_scalars(y, 0.01), [0.01], normalize=False)
        assert curve.sigma_a[0] == np.sqrt(2.0)

    @pytest.mark.parametrize("k", [1, 2, 4, 8])
    def test_white_noise_law(self, k):
        s = white(1024, 50, sigma=0.02)
        curve = allan_deviation(s, [0.01 * k], normalize=False)
        assert curve.sigma_a[0] == pytest.approx(0.02 / np.sqrt(k), rel=0.1)

    def test_snr_reciprocal(self):
        curve = snr_scan(white(), [0.01, 0.02, 0.05])
        assert np.allclose(curve.snr * curve.sigma_a, 1.0, rtol=0, atol=1e-15)

    def test_snr_example(self):
        assert AllanCurve([0.01], [2.9e-2]).snr[0] == pytest.approx(34.48, abs=0.01)

    def test_quadrupled_tau_doubles_snr(self):
        curve = snr_scan(white(2048), [0.01, 0.04])
        assert curve.snr[1] / curve.snr[0] == pytest.approx(2.0, rel=0.1)

    def test_drift_turnover(self):
        rng = np.random.default_rng(4)
        n = 2000
        drift = 1.0 + 2e-4 * np.arange(n)
        s = FrameSeries.from_scalars(drift * (1 + 0.01 * rng.standard_normal(n)), 0.01)
        taus = [0.01 * b for b in (1, 2, 5, 10, 20, 50, 100, 200, 500)]
        curve = snr_scan(s, taus)
        peak = int(np.argmax(curve.snr))
        assert 0 < peak < len(taus) - 1
        # at long times sigma grows linearly with tau (analytic linear-drift response)
        assert curve.sigma_a[-1] / curve.sigma_a[-2] == pytest.approx(taus[-1] / taus[-2], rel=0.25)

    def test_non_multiple_tau(self):
        with pytest.raises(ConfigurationError):
            allan_deviation(white(), [0.015])

    def test_too_few_intervals(self):
        with pytest.raises(ConfigurationError):
            allan_deviation(white(10), [0.06])

    def test_two_frames_single_tau(self):
        curve = allan_deviation(white(2), [0.01])
        assert curve.taus.size == 1

    def test_band_mean_option(self):
        s = white(1024, 100, sigma=0.02)
        pix = allan_deviation(s, [0.01]).sigma_a[0]
        mean = allan_deviation(s, [0.01], scalarization="band_mean").sigma_a[0]
        assert mean == pytest.approx(pix / 10, rel=0.15)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-5.0, 5.0))
    def test_offset_invariance(self, c):
        s = white(256, 5)
        y = s.frames / s.frames.mean(axis=0)
        a = allan_deviation(FrameSeries(y, s.axis, 0.01), [0.01, 0.04], normalize=False).sigma_a
        b = allan_deviation(FrameSeries(y + c, s.axis, 0.01), [0.01, 0.04], normalize=False).sigma_a
        assert np.allclose(a, b, rtol=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 16), st.integers(0, 10_000))
    def test_block_average_consistency(self, block, seed):
        s = white(200, 7, seed=seed)
        if s.n_frames // block < 4:
            return
        direct = allan_deviation(s, [0.01 * block]).sigma_a[0]
        via = allan_deviation(block_average(s, block), [0.01 * block]).sigma_a[0]
        assert via == pytest.approx(direct, rel=1e-12)


class TestBlockAverage:
    def test_identity(self):
        s = white(10, 3)
        assert np.array_equal(block_average(s, 1).frames, s.frames)

    def test_alternating(self):
        s = FrameSeries.from_scalars(np.tile([2.0, 6.0], 10), 0.01)
        out = block_average(s, 2)
        assert np.all(out.frames == 4.0) and out.base_integration_time == pytest.approx(0.02)

    def test_white_std_halves(self):
        s = white(4096, 20, sigma=0.04)
        out = block_average(s, 4)
        assert out.frames.std() == pytest.approx(0.02, rel=0.1)


class TestScaling:
    def test_exact_sqrt(self):
        taus = np.geomspace(0.01, 0.5, 12)
        curve = AllanCurve(taus, 1.0 / (7.0 * np.sqrt(taus)))
        assert fit_scaling_exponent(curve, (0.01, 0.5)) == pytest.approx(0.5, abs=1e-12)

    def test_flat(self):
        taus = np.geomspace(0.01, 0.5, 12)
        assert fit_scaling_exponent(AllanCurve(taus, np.full(12, 0.01)), (0.01, 0.5)) == pytest.approx(0.0, abs=1e-12)

    def test_needs_points(self):
        with pytest.raises(ConfigurationError):
            fit_scaling_exponent(AllanCurve([0.01, 0.02], [0.1, 0.07]), (0.01, 0.02))

    def test_brightness(self):
        curve = AllanCurve([0.001, 0.01], [0.05, 1 / 34.0])
        assert np.array_equal(extrapolate_brightness(curve, 1.0).sigma_a, curve.sigma_a)
        assert np.allclose(extrapolate_brightness(curve, 4.0).snr, 2 * curve.snr)
        assert extrapolate_brightness(AllanCurve([0.01], [1 / 34.0]), 100).snr_at(0.001) == pytest.approx(
            34 / np.sqrt(10) * 10
        )

    def test_brightness_positive(self):
        with pytest.raises(ConfigurationError):
            extrapolate_brightness(AllanCurve([0.01], [0.1]), 0.0)


class TestFlux:
    def frame(self, counts, gain=0.35):
        lam = 901.0 + 0.089 * np.arange(248)
        cfg = AcquisitionConfig(gain=gain)
        return Interferogram(Spectrum(lam, counts, AxisKind.WAVELENGTH_NM), cfg)

    def test_operating_point_total(self):
        f = self.frame(np.full(248, 1.26e5 / 248))
        assert estimate_photon_flux(f, FluxCalibration.from_config(f.config)) == pytest.approx(3.6e7)

    def test_zero(self):
        f = self.frame(np.zeros(248))
        assert estimate_photon_flux(f, FluxCalibration()) == 0.0

    def test_gain_linear(self):
        counts = np.full(248, 500.0)
        f = self.frame(counts)
        a = estimate_photon_flux(f, FluxCalibration(gain=0.35))
        b = estimate_photon_flux(f, FluxCalibration(gain=0.70))
        assert b == pytest.approx(a / 2)

    def test_simulated_frame(self, operating_point):
        src, vis, sample, cfg = operating_point
        (frame,) = simulate_burst(src, vis, sample, cfg, 1)
        flux = estimate_photon_flux(frame, FluxCalibration.from_config(cfg))
        assert flux == pytest.approx(3.6e7, rel=0.05)


def test_operating_point_residuals(operating_point):
    src, vis, sample, cfg = operating_point
    series = FrameSeries.from_interferograms(simulate_burst(src, vis, sample, cfg.with_seed(77), 64))
    std = residual_std(pairwise_residuals(series))
    assert 2.9e-2 / 1.5 <= std <= 2.9e-2 * 1.5

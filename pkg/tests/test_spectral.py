import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SIGNAL_HI, SIGNAL_LO, fringe
from nlispec.errors import ConfigurationError, DomainError, FormatError
from nlispec.spectral import (
    AxisKind,
    BandLimits,
    EnvelopeFilter,
    Spectrum,
    analytic_envelope,
    estimate_carrier,
    resample_to_uniform_wavenumber,
    signal_to_idler_wavenumber,
    truncate_band,
    wavelength_to_wavenumber,
)

NU_PUMP = 1e7 / 720.0


class TestUnits:
    @pytest.mark.parametrize("lam, nu", [(1000.0, 10000.0), (720.0, 13888.888888888889), (912.0, 10964.912280701754)])
    def test_wavenumber_examples(self, lam, nu):
        assert wavelength_to_wavenumber(lam) == pytest.approx(nu, rel=1e-12)

    @pytest.mark.parametrize("bad", [0.0, -5.0, np.nan])
    def test_non_positive_wavelength(self, bad):
        with pytest.raises(DomainError):
            wavelength_to_wavenumber(bad)

    def test_band_edges_in_idler(self):
        # 901 nm and 923 nm signal edges against a 720 nm pump
        lo = signal_to_idler_wavenumber(1e7 / 901.0, NU_PUMP)
        hi = signal_to_idler_wavenumber(1e7 / 923.0, NU_PUMP)
        assert lo == pytest.approx(2790.1, abs=0.05)
        assert hi == pytest.approx(3054.7, abs=0.05)

    def test_degenerate_point(self):
        assert signal_to_idler_wavenumber(NU_PUMP / 2, NU_PUMP) == pytest.approx(NU_PUMP / 2)

    def test_signal_beyond_pump(self):
        with pytest.raises(DomainError):
            signal_to_idler_wavenumber(NU_PUMP * 1.01, NU_PUMP)

    @given(st.floats(min_value=1.0, max_value=1e6, allow_nan=False))
    def test_round_trip(self, lam):
        back = wavelength_to_wavenumber(wavelength_to_wavenumber(lam))
        assert back == pytest.approx(lam, rel=4 * np.finfo(float).eps)


class TestSpectrumType:
    def test_rejects_non_monotone(self):
        with pytest.raises(FormatError):
            Spectrum(np.array([1.0, 3.0, 2.0]), np.zeros(3))

    def test_rejects_length_mismatch(self):
        with pytest.raises(FormatError):
            Spectrum(np.array([1.0, 2.0]), np.zeros(3))

    def test_values_read_only(self):
        s = Spectrum(np.array([1.0, 2.0]), np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    def test_band_limits_order(self):
        with pytest.raises(DomainError):
            BandLimits(3000.0, 2900.0)


class TestResample:
    def lam_spectrum(self, values_of_nu, n=300):
        lam = np.linspace(901.0, 923.0, n)
        return Spectrum(lam, values_of_nu(1e7 / lam), AxisKind.WAVELENGTH_NM)

    def test_constant(self):
        out = resample_to_uniform_wavenumber(self.lam_spectrum(lambda nu: np.full_like(nu, 2.5)))
        assert out.axis_kind is AxisKind.WAVENUMBER_CM1
        assert len(out) == 600
        assert np.allclose(out.values, 2.5, atol=1e-12)
        assert out.is_uniform() and out.ascending

    def test_linear_in_nu_exact(self):
        f = lambda nu: 3.0 + 0.01 * (nu - 11000.0)
        out = resample_to_uniform_wavenumber(self.lam_spectrum(f))
        scale = np.abs(out.values).max()
        assert np.max(np.abs(out.values - f(out.axis))) < 1e-12 * scale * 100

    def test_chirped_cosine_single_peak(self):
        opld_cm = 0.145
        s = self.lam_spectrum(lambda nu: np.cos(2 * np.pi * nu * opld_cm), n=1024)
        out = resample_to_uniform_wavenumber(s)
        oracle = np.cos(2 * np.pi * out.axis * opld_cm)
        assert np.max(np.abs(out.values - oracle)) < 5e-3
        spec = np.abs(np.fft.rfft(out.values * np.hanning(len(out))))
        freq = np.fft.rfftfreq(len(out), out.axis[1] - out.axis[0])
        assert freq[np.argmax(spec)] == pytest.approx(opld_cm, rel=0.02)
        ratio = np.sort(spec)[-1] / spec[np.abs(freq - opld_cm) > 0.02].max()
        assert ratio > 50

    def test_truncate_identity_and_small(self):
        s = fringe(256)
        full = BandLimits(s.axis[0], s.axis[-1])
        assert np.array_equal(truncate_band(s, full).values, s.values)
        d = s.axis[1] - s.axis[0]
        one = truncate_band(s, BandLimits(s.axis[10] - 0.1 * d, s.axis[10] + 0.9 * d))
        assert len(one) in (1, 2)

    def test_truncate_pixel_count(self):
        # 22 nm band of 0.089 nm pixels holds about 247 samples
        lam = 899.0445 + 0.089 * np.arange(292)
        s = Spectrum(lam, np.ones(lam.size), AxisKind.WAVELENGTH_NM)
        out = truncate_band(s, BandLimits(SIGNAL_LO, SIGNAL_HI))
        assert abs(len(out) - 247) <= 2

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 0.4), st.floats(0.6, 0.9))
    def test_truncate_resample_commute(self, a, b):
        lam = np.linspace(895.0, 930.0, 500)
        s = Spectrum(lam, np.sin(1e7 / lam / 40.0) + 2.0, AxisKind.WAVELENGTH_NM)
        nu = 1e7 / lam
        band = BandLimits(nu.min() + a * np.ptp(nu), nu.min() + b * np.ptp(nu))
        one = resample_to_uniform_wavenumber(s, 2000)
        one = truncate_band(one, band)
        two = resample_to_uniform_wavenumber(truncate_band(s, band), 2000)
        f = lambda x: np.sin(x / 40.0) + 2.0
        assert np.max(np.abs(one.values - f(one.axis))) < 1e-6
        assert np.max(np.abs(two.values - f(two.axis))) < 1e-6


class TestEnvelope:
    def test_reference_fringe(self):
        env = analytic_envelope(fringe(vis=0.3), EnvelopeFilter.for_opld(1.45))
        assert np.max(np.abs(env.values / 0.3 - 1.0)) < 0.01

    def test_zero_visibility(self):
        env = analytic_envelope(fringe(vis=0.0), EnvelopeFilter.for_opld(1.45))
        assert np.max(env.values) < 1e-3

    def test_phase_invariance(self):
        flt = EnvelopeFilter.for_opld(1.45)
        ref = analytic_envelope(fringe(phase=0.0), flt).values
        for phi in (np.pi / 4, np.pi / 2):
            other = analytic_envelope(fringe(phase=phi), flt).values
            assert np.max(np.abs(other / ref - 1)) < 1e-3

    def test_auto_carrier(self):
        s = fringe(vis=0.185, opld_mm=0.5)
        assert estimate_carrier(s) == pytest.approx(0.05, rel=0.01)
        env = analytic_envelope(s)
        assert np.max(np.abs(env.values / 0.185 - 1)) < 0.01

    def test_edges_removed(self):
        s = fringe(n=2000)
        env = analytic_envelope(s, EnvelopeFilter.for_opld(1.45))
        assert len(env) == 1800
        assert env.axis[0] == s.axis[100]

    def test_wavelength_axis_rejected(self):
        lam = np.linspace(901, 923, 100)
        with pytest.raises(ConfigurationError):
            analytic_envelope(Spectrum(lam, np.ones(100), AxisKind.WAVELENGTH_NM))

    def test_undersampled_carrier_rejected(self):
        s = fringe(n=100, opld_mm=1.45)  # ~2.6 samples per fringe
        with pytest.raises(ConfigurationError):
            analytic_envelope(s, EnvelopeFilter.for_opld(1.45))

    def test_passband_must_exclude_dc(self):
        with pytest.raises(ConfigurationError):
            EnvelopeFilter(passband=BandLimits(-0.1, 0.2))

    @settings(max_examples=25, deadline=None)
    @given(
        st.floats(0.1, 100.0), st.floats(0.02, 1.0), st.floats(0.0, 2 * np.pi),
        st.floats(0.5, 2.0),
    )
    def test_pure_fringe_property(self, amplitude, vis, phase, opld_mm):
        s = fringe(amplitude=amplitude, vis=vis, phase=phase, opld_mm=opld_mm)
        env = analytic_envelope(s, EnvelopeFilter.for_opld(opld_mm))
        assert np.max(np.abs(env.values / (amplitude * vis) - 1)) < 0.01

    @settings(max_examples=20, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_homogeneity(self, c):
        flt = EnvelopeFilter.for_opld(1.45)
        s = fringe(vis=0.2)
        base = analytic_envelope(s, flt).values
        scaled = analytic_envelope(s.with_values(c * s.values), flt).values
        assert np.allclose(scaled, c * base, rtol=1e-9)

    def test_slow_background_and_envelope(self):
        # envelope follows a slowly varying S(nu)*V(nu) product
        nu = np.linspace(SIGNAL_LO, SIGNAL_HI, 2048)
        bg = 1.0 + 0.3 * np.sin((nu - nu[0]) / np.ptp(nu) * np.pi)
        v = 0.2 - 0.1 * np.exp(-0.5 * ((nu - nu.mean()) / 15.0) ** 2)
        s = Spectrum(nu, bg * (1 + v * np.cos(2 * np.pi * nu * 0.145)))
        env = analytic_envelope(s, EnvelopeFilter.for_opld(1.45))
        expect = np.interp(env.axis, nu, bg * v)
        assert np.max(np.abs(env.values - expect)) / expect.max() < 0.02

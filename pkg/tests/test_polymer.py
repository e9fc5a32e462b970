import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlispec.errors import ConfigurationError, FormatError
from nlispec.polymer import (
    LibraryPeak,
    Peak,
    PeakLibrary,
    PeakList,
    builtin_library,
    detect_peaks,
    library_from_dict,
    library_to_dict,
    match_polymer,
)
from nlispec.retrieval import AbsorbanceSpectrum
from nlispec.samples import POLYMER_BANDS, band_absorbance, polymer_sample, random_height_factors
from nlispec.spectral import BandLimits


def peaks_at(*positions):
    return PeakList(tuple(Peak(p, 1.0, 10.0, 10.0) for p in positions))


def synthetic(name, sigma=0.01, n=500):
    axis = np.linspace(2800, 3050, n)
    a = band_absorbance(axis, POLYMER_BANDS[name])
    return AbsorbanceSpectrum(axis, a, np.full(n, sigma), np.zeros(n, dtype=bool))


class TestMatching:
    lib = builtin_library()

    def test_exact_ps(self):
        r = match_polymer(peaks_at(3025, 2924, 2850), self.lib)
        assert r.decision == "PS" and r.score("PS") == pytest.approx(1.0)

    def test_pe_pp_discrimination(self):
        assert match_polymer(peaks_at(2915, 2850), self.lib).top == "PE"
        assert match_polymer(peaks_at(2953, 2918, 2838), self.lib).top == "PP"

    def test_empty(self):
        r = match_polymer(PeakList(), self.lib)
        assert r.decision is None and all(s == 0 for _, s in r.scores)

    def test_offset_decreases_score(self):
        r = match_polymer(peaks_at(3025 + 4, 2924 + 4, 2850 + 4), self.lib)
        assert r.score("PS") == pytest.approx(0.5)

    def test_outside_tolerance(self):
        assert match_polymer(peaks_at(3040), self.lib).score("PS") == 0.0

    def test_one_to_one(self):
        # two detections near one library band credit it only once
        r = match_polymer(peaks_at(3025, 3026), self.lib)
        assert r.score("PS") == pytest.approx(0.5)

    def test_tie_break_by_name(self):
        lib = PeakLibrary({"B": (LibraryPeak(2900.0),), "A": (LibraryPeak(2900.0),)})
        assert match_polymer(peaks_at(2900), lib).top == "A"

    def test_threshold(self):
        r = match_polymer(peaks_at(3025), self.lib, threshold=0.6)
        assert r.score("PS") == pytest.approx(0.5) and r.decision is None

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(2800, 3050), max_size=8))
    def test_scores_bounded(self, positions):
        r = match_polymer(peaks_at(*positions), self.lib)
        assert all(0.0 <= s <= 1.0 for _, s in r.scores)
        assert [s for _, s in r.scores] == sorted((s for _, s in r.scores), reverse=True)


class TestDetect:
    @pytest.mark.parametrize("name", ["PS", "PP", "PE"])
    def test_noiseless_positions(self, name):
        peaks = detect_peaks(synthetic(name))
        found = sorted(peaks.positions)
        expect = sorted(c for c, _, _ in POLYMER_BANDS[name])
        assert len(found) == len(expect)
        assert np.allclose(found, expect, atol=1.0)

    def test_flat_no_peaks(self):
        axis = np.linspace(2800, 3050, 300)
        a = AbsorbanceSpectrum(axis, np.zeros(300), np.full(300, 0.01), np.zeros(300, dtype=bool))
        assert len(detect_peaks(a)) == 0

    def test_snr_gate(self):
        a = synthetic("PE", sigma=1.0)
        assert len(detect_peaks(a, min_snr=3.0)) == 0

    def test_saturated_kept(self):
        a = synthetic("PE", sigma=1.0)
        a = AbsorbanceSpectrum(a.axis, a.values, a.sigma, np.ones(a.axis.size, dtype=bool))
        peaks = detect_peaks(a, min_snr=3.0)
        assert len(peaks) == 2 and all(p.saturated for p in peaks.peaks)

    @pytest.mark.parametrize("name", ["PS", "PP", "PE"])
    def test_noiseless_identification(self, name):
        assert match_polymer(detect_peaks(synthetic(name)), builtin_library()).decision == name


class TestLibraryFiles:
    def test_round_trip(self):
        lib = builtin_library()
        assert library_from_dict(library_to_dict(lib)) == lib

    def test_malformed(self):
        for bad in ({}, {"PS": "nope"}, {"PS": [{"center_cm1": 1.0}]}, [1, 2]):
            with pytest.raises(FormatError):
                library_from_dict(bad)

    def test_bad_values(self):
        with pytest.raises(ConfigurationError):
            LibraryPeak(2900.0, tolerance_cm1=0.0)
        with pytest.raises(ConfigurationError):
            PeakLibrary({"X": ()})


class TestSamples:
    def test_min_transmission(self):
        model, absorb = polymer_sample("PS", BandLimits(2800, 3050), 0.3)
        assert model.transmission.values.min() == pytest.approx(0.3)
        assert absorb.values.max() == pytest.approx(-np.log10(0.3))

    def test_height_factors(self):
        f = random_height_factors("PP", np.random.default_rng(0))
        assert f.shape == (3,) and np.all((f >= 0.8) & (f <= 1.2))
        with pytest.raises(ConfigurationError):
            polymer_sample("PP", BandLimits(2800, 3050), 0.3, [1.0, 1.0])

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            polymer_sample("PVC", BandLimits(2800, 3050))


def test_single_gaussian_example():
    axis = np.linspace(2800, 3050, 600)
    rng = np.random.default_rng(5)
    y = 0.5 * np.exp(-0.5 * ((axis - 2918.0) / 6.0) ** 2) + 0.01 * rng.standard_normal(axis.size)
    peaks = detect_peaks(AbsorbanceSpectrum(axis, y, np.full(axis.size, 0.01), np.zeros(axis.size, dtype=bool)))
    assert len(peaks) == 1 and abs(peaks.peaks[0].position - 2918.0) <= 1.0


def test_score_invariances():
    lib = builtin_library()
    base = synthetic("PP")
    ref = match_polymer(detect_peaks(base), lib).scores
    for op in (lambda v: v + 0.3, lambda v: 2.5 * v):
        changed = AbsorbanceSpectrum(base.axis, op(base.values), base.sigma, base.saturated)
        got = match_polymer(detect_peaks(changed), lib).scores
        assert [n for n, _ in got] == [n for n, _ in ref]
        assert np.allclose([v for _, v in got], [v for _, v in ref], rtol=0, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["PS", "PP", "PE"]), st.lists(st.floats(-1.99, 1.99), min_size=3, max_size=3))
def test_decision_stability(name, shifts):
    centres = [c for c, _, _ in POLYMER_BANDS[name]]
    moved = [c + d for c, d in zip(centres, shifts)]
    assert match_polymer(peaks_at(*moved), builtin_library()).top == name


def test_ps_closed_loop_noiseless(operating_point):
    from nlispec.forward import simulate_frame
    from nlispec.retrieval import RetrievalConfig, retrieve

    src, vis, ref, cfg = operating_point
    model, _ = polymer_sample("PS", src.idler_band, 0.3)
    a = retrieve(simulate_frame(src, vis, model, cfg, noise=False), simulate_frame(src, vis, ref, cfg, noise=False),
                 RetrievalConfig(bootstrap_resamples=2))
    pos = detect_peaks(a, 0.0).positions
    assert np.any(np.abs(pos - 3025.0) <= 2.0)
    assert np.any((pos >= 2848.0) & (pos <= 2926.0))


def test_builtin_library_contents():
    lib = builtin_library()
    assert 3025.0 in [p.center_cm1 for p in lib.entries["PS"]]
    assert [p.center_cm1 for p in lib.entries["PP"]] == [2953.0, 2918.0, 2838.0]
    assert all(p.tolerance_cm1 >= 6.0 for peaks in lib.entries.values() for p in peaks)
    assert all(2700 <= p.center_cm1 <= 3100 for peaks in lib.entries.values() for p in peaks)

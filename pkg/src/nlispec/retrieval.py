"""Single-shot absorbance retrieval from a sample/reference interferogram pair.

Frames are resampled to a uniform signal-wavenumber grid, truncated to the
analysis band and demodulated; the ratio of envelopes gives the idler-arm
transmission, which is mapped onto the ascending idler axis, converted to
absorbance and optionally baseline corrected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, ReferenceInvalidError
from .forward import Interferogram
from .spectral import (
    BandLimits,
    Demodulated,
    EnvelopeFilter,
    Spectrum,
    analytic_envelope_rows,
    demodulate,
    resample_to_uniform_wavenumber,
    truncate_band,
)

LN10 = np.log(10.0)


@dataclass(frozen=True)
class RetrievalConfig:
    """Settings of the inverse pipeline.

    ``analysis_band`` is in signal wavenumber and defaults to the frame's
    signal band. Baseline correction runs only when ``baseline_regions``
    (idler wavenumber) are given. ``noise_method`` selects how per-point
    envelope noise is estimated when no reference burst is supplied.
    """

    analysis_band: BandLimits | None = None
    envelope_filter: EnvelopeFilter = field(default_factory=EnvelopeFilter)
    baseline_order: int = 2
    baseline_regions: tuple[BandLimits, ...] = ()
    saturation_k: float = 3.0
    clip_floor: float = 1e-3
    clip_ceiling: float = 1.2
    max_flagged_reference_fraction: float = 0.5
    bootstrap_resamples: int = 32
    seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.baseline_order) <= 4 or int(self.baseline_order) != self.baseline_order:
            raise ConfigurationError("baseline_order must be an integer in [0, 4]")
        if not self.saturation_k > 0:
            raise ConfigurationError("saturation_k must be positive")
        if not 0 < self.clip_floor < self.clip_ceiling:
            raise ConfigurationError("need 0 < clip_floor < clip_ceiling")
        if not 0 <= self.max_flagged_reference_fraction <= 1:
            raise ConfigurationError("max_flagged_reference_fraction must lie in [0, 1]")
        if self.bootstrap_resamples < 2:
            raise ConfigurationError("bootstrap_resamples must be >= 2")
        object.__setattr__(self, "baseline_regions", tuple(self.baseline_regions))

    @property
    def baseline_enabled(self) -> bool:
        return len(self.baseline_regions) > 0

    def filter_for(self, frame: Interferogram) -> EnvelopeFilter:
        """Envelope filter, centred on the frame's recorded OPLD when it is known."""
        flt = self.envelope_filter
        if flt.passband is None and "opld_mm" in frame.metadata:
            return EnvelopeFilter.for_opld(
                float(frame.metadata["opld_mm"]),
                edge_exclusion_fraction=flt.edge_exclusion_fraction,
                taper_fraction=flt.taper_fraction,
                halfwidth_fraction=flt.halfwidth_fraction,
                refine_iterations=flt.refine_iterations,
            )
        return flt


def _check_point_arrays(axis, values, sigma, saturated):
    axis = np.asarray(axis, dtype=float)
    values = np.asarray(values, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    saturated = np.asarray(saturated, dtype=bool)
    if not (axis.shape == values.shape == sigma.shape == saturated.shape) or axis.ndim != 1:
        raise ConfigurationError("axis, values, sigma and saturated must be equal-length 1-D arrays")
    if axis.size > 1 and not np.all(np.diff(axis) > 0):
        raise ConfigurationError("retrieved products must have an ascending axis")
    if np.any(sigma < 0) or not np.all(np.isfinite(values)):
        raise DomainError("sigma must be >= 0 and values finite")
    for a in (axis, values, sigma, saturated):
        a.setflags(write=False)
    return axis, values, sigma, saturated


@dataclass(frozen=True, eq=False)
class TransmissionSpectrum:
    axis: np.ndarray
    values: np.ndarray
    sigma: np.ndarray
    saturated: np.ndarray

    def __post_init__(self):
        arrs = _check_point_arrays(self.axis, self.values, self.sigma, self.saturated)
        for name, a in zip(("axis", "values", "sigma", "saturated"), arrs):
            object.__setattr__(self, name, a)


@dataclass(frozen=True, eq=False)
class AbsorbanceSpectrum:
    """Absorbance on the ascending idler axis with a 1-sigma band and flags."""

    axis: np.ndarray
    values: np.ndarray
    sigma: np.ndarray
    saturated: np.ndarray
    baseline: np.ndarray | None = None

    def __post_init__(self):
        arrs = _check_point_arrays(self.axis, self.values, self.sigma, self.saturated)
        for name, a in zip(("axis", "values", "sigma", "saturated"), arrs):
            object.__setattr__(self, name, a)
        if self.baseline is not None:
            b = np.array(self.baseline, dtype=float)
            b.setflags(write=False)
            object.__setattr__(self, "baseline", b)

    def __len__(self) -> int:
        return self.axis.size

    def as_spectrum(self) -> Spectrum:
        return Spectrum(self.axis, self.values)


# -- envelopes -------------------------------------------------------------------------


def _uniform_band(frame: Interferogram, cfg: RetrievalConfig) -> Spectrum:
    band = cfg.analysis_band or frame.signal_band
    uniform = resample_to_uniform_wavenumber(frame.spectrum)
    if uniform.axis[0] > band.lo or uniform.axis[-1] < band.hi:
        raise DomainError(
            f"frame covers [{uniform.axis[0]:.1f}, {uniform.axis[-1]:.1f}] cm^-1, "
            f"analysis band is [{band.lo:.1f}, {band.hi:.1f}]"
        )
    return truncate_band(uniform, band)


def demodulate_frame(frame: Interferogram, cfg: RetrievalConfig) -> Demodulated:
    """Envelope and background of a frame on the signal wavenumber axis."""
    return demodulate(_uniform_band(frame, cfg), cfg.filter_for(frame))


def extract_envelope(frame: Interferogram, cfg: RetrievalConfig) -> Spectrum:
    """Resample, truncate and demodulate one frame; ``E(nu_s) ~ S*V``."""
    return demodulate_frame(frame, cfg).envelope


def _envelope_rows(frames: list[Interferogram], cfg: RetrievalConfig):
    first = _uniform_band(frames[0], cfg)
    flt = cfg.filter_for(frames[0]).resolved(first)
    rows = [first.values]
    for f in frames[1:]:
        rows.append(_uniform_band(f, cfg).values)
    return analytic_envelope_rows(np.vstack(rows), first.axis, flt)


def envelope_noise_from_burst(frames: list[Interferogram], cfg: RetrievalConfig) -> Spectrum:
    """Per-point envelope noise from consecutive-frame differences.

    ``sigma_E = sqrt(mean((E[k+1] - E[k])**2) / 2)``, which is insensitive to
    the (fixed) spectral structure shared by all frames.
    """
    if len(frames) < 2:
        raise ConfigurationError("a noise burst needs at least two frames")
    axis, env = _envelope_rows(frames, cfg)
    diff = np.diff(env, axis=0)
    return Spectrum(axis, np.sqrt(0.5 * np.mean(diff**2, axis=0)))


def envelope_noise_bootstrap(frame: Interferogram, cfg: RetrievalConfig, seed: int | None = None) -> Spectrum:
    """Per-point envelope noise by parametric Poisson resampling of one frame."""
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    gain = frame.config.gain
    photons = np.maximum(frame.spectrum.values / gain, 0.0)
    base = _uniform_band(frame, cfg)
    flt = cfg.filter_for(frame).resolved(base)
    rows = []
    for _ in range(cfg.bootstrap_resamples):
        draw = Interferogram(
            frame.spectrum.with_values(gain * rng.poisson(photons).astype(float)),
            frame.config, frame.pump_wavelength_nm, frame.signal_band_nm, frame.metadata,
        )
        rows.append(_uniform_band(draw, cfg).values)
    axis, env = analytic_envelope_rows(np.vstack(rows), base.axis, flt)
    return Spectrum(axis, env.std(axis=0, ddof=1))


# -- ratio and absorbance --------------------------------------------------------------


def _same_axis(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and np.allclose(a, b, rtol=1e-12, atol=1e-9)


def transmission(
    sample_env: Spectrum,
    reference_env: Spectrum,
    cfg: RetrievalConfig,
    *,
    nu_pump: float,
    sigma_sample=None,
    sigma_reference=None,
) -> TransmissionSpectrum:
    """Envelope ratio on the ascending idler axis.

    Points with ``E_sample < saturation_k * sigma`` are flagged saturated;
    reference points below their own noise are flagged too. The reference is
    rejected outright only when it is non-finite, nowhere positive or more
    than ``max_flagged_reference_fraction`` of it sits below the noise.
    """
    if not _same_axis(sample_env.axis, reference_env.axis):
        raise ConfigurationError("sample and reference envelopes must share an axis")
    es = sample_env.values
    er = reference_env.values
    n = es.size
    ss = np.zeros(n) if sigma_sample is None else np.broadcast_to(np.asarray(sigma_sample, float), (n,))
    sr = np.zeros(n) if sigma_reference is None else np.broadcast_to(np.asarray(sigma_reference, float), (n,))
    if not np.all(np.isfinite(er)) or not np.any(er > 0):
        raise ReferenceInvalidError("reference envelope is non-finite or nowhere positive")
    weak = (er <= 0) | (er < sr)
    if weak.mean() > cfg.max_flagged_reference_fraction:
        raise ReferenceInvalidError(
            f"{weak.mean():.0%} of the reference envelope lies below its noise floor"
        )
    safe_er = np.where(er > 0, er, np.nan)
    t = es / safe_er
    rel = np.sqrt((ss / np.where(es > 0, es, np.nan)) ** 2 + (sr / safe_er) ** 2)
    t = np.nan_to_num(t, nan=cfg.clip_floor)
    t_clip = np.clip(t, cfg.clip_floor, cfg.clip_ceiling)
    # a vanishing sample envelope has relative error sigma_s / (T * E_r)
    rel = np.where(np.isfinite(rel), rel, np.sqrt((ss / (t_clip * np.nan_to_num(safe_er, nan=1.0))) ** 2))
    sigma_t = t_clip * rel
    saturated = (es < cfg.saturation_k * ss) | weak
    axis = nu_pump - sample_env.wavenumbers()
    order = np.argsort(axis)
    return TransmissionSpectrum(axis[order], t_clip[order], sigma_t[order], saturated[order])


def absorbance(t: TransmissionSpectrum) -> AbsorbanceSpectrum:
    """Decadic absorbance ``-log10(T)`` with ``sigma_A = sigma_T / (T ln 10)``."""
    if np.any(t.values <= 0):
        raise DomainError("transmission must be clipped positive before taking logs")
    return AbsorbanceSpectrum(
        t.axis, -np.log10(t.values), t.sigma / (t.values * LN10), t.saturated
    )


def baseline_correct(a: AbsorbanceSpectrum, cfg: RetrievalConfig) -> AbsorbanceSpectrum:
    """Subtract a least-squares polynomial fitted on the non-absorbing regions."""
    if not cfg.baseline_enabled:
        return a
    mask = np.zeros(a.axis.size, dtype=bool)
    for region in cfg.baseline_regions:
        mask |= region.mask(a.axis)
    mask &= ~a.saturated
    order = int(cfg.baseline_order)
    if np.unique(a.axis[mask]).size < order + 1:
        raise ConfigurationError(
            f"baseline regions hold {int(mask.sum())} usable points, "
            f"need at least {order + 1} for order {order}"
        )
    poly = np.polynomial.Polynomial.fit(a.axis[mask], a.values[mask], order)
    base = poly(a.axis)
    return AbsorbanceSpectrum(a.axis, a.values - base, a.sigma, a.saturated, base)


# -- pipeline --------------------------------------------------------------------------


def check_compatible(sample: Interferogram, reference: Interferogram) -> None:
    cs, cr = sample.config, reference.config
    problems = []
    for name in ("integration_time_s", "pixel_pitch_nm", "gain"):
        if not np.isclose(getattr(cs, name), getattr(cr, name), rtol=1e-9):
            problems.append(name)
    if not np.isclose(sample.pump_wavelength_nm, reference.pump_wavelength_nm, rtol=1e-12):
        problems.append("pump_wavelength_nm")
    if not _same_axis(sample.spectrum.axis, reference.spectrum.axis):
        problems.append("wavelength axis")
    if problems:
        raise ConfigurationError("sample and reference acquisitions differ in " + ", ".join(problems))


def power_scale(sample: Demodulated, reference: Demodulated) -> float:
    """Ratio of band-integrated backgrounds, reference over sample.

    The mean fringe level does not depend on the sample, so any difference
    between the two frames is a global count scale (source power, frame
    normalization) that would otherwise leak into the transmission.
    """
    bs = float(np.sum(sample.background.values))
    br = float(np.sum(reference.background.values))
    if not (bs > 0 and br > 0):
        raise ReferenceInvalidError("frame background is not positive")
    return br / bs


def retrieve(
    sample: Interferogram,
    reference: Interferogram,
    cfg: RetrievalConfig | None = None,
    reference_burst: list[Interferogram] | None = None,
) -> AbsorbanceSpectrum:
    """Absorbance spectrum with 1-sigma noise band from a frame pair.

    The sample envelope is first rescaled by :func:`power_scale`. Envelope
    noise comes from ``reference_burst`` when given (the source spectrum and
    hence the absolute envelope noise is sample independent); otherwise each
    frame is bootstrap-resampled.
    """
    cfg = RetrievalConfig() if cfg is None else cfg
    check_compatible(sample, reference)
    ds = demodulate_frame(sample, cfg)
    dr = demodulate_frame(reference, cfg)
    scale = power_scale(ds, dr)
    es = ds.envelope.with_values(ds.envelope.values * scale)
    er = dr.envelope
    if reference_burst:
        for f in reference_burst:
            check_compatible(f, reference)
        sig = envelope_noise_from_burst(list(reference_burst), cfg).values
        sig_s = sig_r = sig
    else:
        sig_s = scale * envelope_noise_bootstrap(sample, cfg, cfg.seed).values
        sig_r = envelope_noise_bootstrap(reference, cfg, cfg.seed + 1).values
    t = transmission(
        es, er, cfg, nu_pump=sample.pump_wavenumber, sigma_sample=sig_s, sigma_reference=sig_r
    )
    return baseline_correct(absorbance(t), cfg)

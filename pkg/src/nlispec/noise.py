"""Noise and stability metrics: residuals, Allan-Werle deviation, SNR scaling.

A :class:`FrameSeries` holds consecutive spectra as rows of a 2-D array.
The two-sample deviation of interval averages is computed per spectral
point and pooled over the band (RMS), which for shot-noise-limited frames
equals the per-pixel relative photon noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .forward import AcquisitionConfig, Interferogram
from .spectral import BandLimits, Spectrum, to_idler_axis

# idler band blanked in the noise analysis for the crystal absorption
CRYSTAL_EXCLUSION = (BandLimits(2850.0, 2925.0),)


@dataclass(frozen=True, eq=False)
class FrameSeries:
    """Consecutive spectra on a common axis, acquired every ``base_integration_time``."""

    frames: np.ndarray
    axis: np.ndarray
    base_integration_time: float

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        if frames.ndim == 1:
            frames = frames[:, None]
        axis = np.array(self.axis, dtype=float).reshape(-1)
        if frames.ndim != 2 or frames.shape[0] < 2:
            raise ConfigurationError("a frame series needs at least two frames")
        if frames.shape[1] != axis.size:
            raise ConfigurationError("every frame must share the series axis")
        if not self.base_integration_time > 0:
            raise ConfigurationError("base_integration_time must be positive")
        frames.setflags(write=False)
        axis.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "axis", axis)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @classmethod
    def from_scalars(cls, values, base_integration_time: float) -> "FrameSeries":
        """Series of one-point frames, e.g. an already band-averaged signal."""
        return cls(np.asarray(values, dtype=float)[:, None], np.array([1.0]), base_integration_time)

    @classmethod
    def from_spectra(cls, spectra: list[Spectrum], base_integration_time: float) -> "FrameSeries":
        if len(spectra) < 2:
            raise ConfigurationError("a frame series needs at least two frames")
        axis = spectra[0].axis
        for s in spectra[1:]:
            if s.axis.shape != axis.shape or not np.allclose(s.axis, axis):
                raise ConfigurationError("every frame must share the series axis")
        return cls(np.vstack([s.values for s in spectra]), axis, base_integration_time)

    @classmethod
    def from_interferograms(cls, frames: list[Interferogram]) -> "FrameSeries":
        """In-band detected counts re-expressed on the ascending idler axis."""
        if len(frames) < 2:
            raise ConfigurationError("a frame series needs at least two frames")
        tau = frames[0].config.integration_time_s
        spectra = []
        for f in frames:
            if not np.isclose(f.config.integration_time_s, tau, rtol=1e-12):
                raise ConfigurationError("all frames must share one integration time")
            m = f.in_band_mask()
            band = Spectrum(f.spectrum.axis[m], f.spectrum.values[m], f.spectrum.axis_kind)
            spectra.append(to_idler_axis(band, f.pump_wavenumber))
        return cls.from_spectra(spectra, tau)

    def point_mask(self, exclude=()) -> np.ndarray:
        keep = np.ones(self.axis.size, dtype=bool)
        for band in exclude:
            keep &= ~band.mask(self.axis)
        return keep


@dataclass(frozen=True, eq=False)
class AllanCurve:
    """Allan-Werle deviation versus averaging time; ``snr = 1/sigma_a``."""

    taus: np.ndarray
    sigma_a: np.ndarray
    intervals: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        taus = np.array(self.taus, dtype=float).reshape(-1)
        sig = np.array(self.sigma_a, dtype=float).reshape(-1)
        if taus.shape != sig.shape or taus.size == 0:
            raise ConfigurationError("taus and sigma_a must be equal-length and non-empty")
        if taus.size > 1 and not np.all(np.diff(taus) > 0):
            raise ConfigurationError("taus must be ascending")
        for a in (taus, sig):
            a.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "sigma_a", sig)
        if self.intervals is not None:
            object.__setattr__(self, "intervals", np.array(self.intervals, dtype=int))

    @property
    def snr(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.sigma_a

    def snr_at(self, tau: float) -> float:
        """SNR at ``tau``; log-log interpolation inside the curve, sqrt(tau) scaling outside."""
        taus, snr = self.taus, self.snr
        if tau <= 0:
            raise ConfigurationError("tau must be positive")
        if tau <= taus[0]:
            return float(snr[0] * np.sqrt(tau / taus[0]))
        if tau >= taus[-1]:
            return float(snr[-1] * np.sqrt(tau / taus[-1]))
        return float(np.exp(np.interp(np.log(tau), np.log(taus), np.log(snr))))

    def peak_tau(self) -> float:
        return float(self.taus[int(np.argmax(self.snr))])


@dataclass(frozen=True)
class FluxCalibration:
    """Detection-chain factors needed to turn counts into photon flux."""

    gain: float = 0.35
    quantum_efficiency: float = 0.42
    grating_efficiency: float = 0.5
    pixel_pitch_nm: float = 0.089
    bandwidth_nm: float = 22.0

    def __post_init__(self):
        for name in ("gain", "pixel_pitch_nm", "bandwidth_nm"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("quantum_efficiency", "grating_efficiency"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigurationError(f"{name} must lie in (0, 1]")

    @classmethod
    def from_config(cls, cfg: AcquisitionConfig, bandwidth_nm: float = 22.0) -> "FluxCalibration":
        return cls(cfg.gain, cfg.quantum_efficiency, cfg.grating_efficiency, cfg.pixel_pitch_nm, bandwidth_nm)


# -- residuals -------------------------------------------------------------------------


def pairwise_residuals(series: FrameSeries, exclude=CRYSTAL_EXCLUSION) -> list[Spectrum]:
    """Normalized consecutive differences ``2(E[k+1]-E[k])/(E[k+1]+E[k])``.

    Points inside ``exclude`` or with a zero denominator are NaN.
    """
    f = series.frames
    keep = series.point_mask(exclude)
    num = 2.0 * (f[1:] - f[:-1])
    den = f[1:] + f[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den != 0, num / den, np.nan)
    r[:, ~keep] = np.nan
    return [Spectrum(series.axis, row) for row in r]


def residual_std(residuals: list[Spectrum]) -> float:
    """Pooled standard deviation of all unmasked residual points."""
    vals = np.concatenate([r.values for r in residuals])
    vals = vals[np.isfinite(vals)]
    if vals.size < 2:
        raise ConfigurationError("no unmasked residual points")
    return float(np.std(vals, ddof=1))


# -- Allan-Werle -----------------------------------------------------------------------


def allan_deviation_values(y, block: int = 1) -> np.ndarray:
    """Two-sample deviation of ``block``-averaged intervals, per column.

    ``sqrt(sum((ybar[k+1] - ybar[k])**2) / (2 (M - 1)))`` with ``M`` contiguous
    intervals; trailing frames that do not fill an interval are dropped.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    block = int(block)
    if block < 1:
        raise ConfigurationError("block must be >= 1")
    m_int = y.shape[0] // block
    if m_int < 2:
        raise ConfigurationError(
            f"{y.shape[0]} frames give {m_int} interval(s) of {block}; need at least 2"
        )
    ybar = y[: m_int * block].reshape(m_int, block, -1).mean(axis=1)
    d = np.diff(ybar, axis=0)
    return np.sqrt(np.sum(d**2, axis=0) / (2.0 * (m_int - 1)))


def _block_for(series: FrameSeries, tau: float) -> int:
    ratio = tau / series.base_integration_time
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-6 * max(ratio, 1.0):
        raise ConfigurationError(
            f"tau={tau} s is not a multiple of the base time {series.base_integration_time} s"
        )
    return m


def allan_deviation(
    series: FrameSeries,
    taus,
    exclude=(),
    normalize: bool = True,
    scalarization: str = "pixel",
) -> AllanCurve:
    """Allan-Werle deviation of a frame series at each averaging time.

    With ``normalize`` each spectral point is divided by its mean over the
    frames that enter the estimate at that ``tau``. ``scalarization`` is
    ``"pixel"`` (per-point deviation pooled as RMS over the band) or
    ``"band_mean"`` (deviation of the band-averaged signal).
    """
    if scalarization not in ("pixel", "band_mean"):
        raise ConfigurationError("scalarization must be 'pixel' or 'band_mean'")
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size == 0:
        raise ConfigurationError("at least one tau is required")
    keep = series.point_mask(exclude)
    if not keep.any():
        raise ConfigurationError("every spectral point is excluded")
    data = series.frames[:, keep]
    order = np.argsort(taus)
    sig, counts = [], []
    for tau in taus[order]:
        m = _block_for(series, tau)
        used = data[: (data.shape[0] // m) * m]
        if used.shape[0] < 2 * m:
            raise ConfigurationError(f"tau={tau} s leaves fewer than two intervals")
        y = used
        if normalize:
            mean = used.mean(axis=0)
            if np.any(mean == 0):
                raise ConfigurationError("cannot normalize spectral points with zero mean")
            y = used / mean
        if scalarization == "band_mean":
            y = y.mean(axis=1)
            s = float(allan_deviation_values(y, m)[0])
        else:
            s = float(np.sqrt(np.mean(allan_deviation_values(y, m) ** 2)))
        sig.append(s)
        counts.append(used.shape[0] // m)
    return AllanCurve(taus[order], sig, counts, {"scalarization": scalarization, "normalize": normalize})


def snr_scan(series: FrameSeries, taus, **kwargs) -> AllanCurve:
    """Same as :func:`allan_deviation`; the curve exposes ``snr = 1/sigma_a``."""
    return allan_deviation(series, taus, **kwargs)


def block_average(series: FrameSeries, block: int) -> FrameSeries:
    """Average ``block`` consecutive frames; the trailing remainder is dropped."""
    block = int(block)
    if block < 1:
        raise ConfigurationError("block must be >= 1")
    n = series.n_frames // block
    if n < 2:
        raise ConfigurationError(f"block {block} leaves fewer than two frames")
    f = series.frames[: n * block].reshape(n, block, -1).mean(axis=1)
    return FrameSeries(f, series.axis, series.base_integration_time * block)


def fit_scaling_exponent(curve: AllanCurve, tau_range: tuple[float, float]) -> float:
    """Least-squares slope of log(SNR) against log(tau) over ``tau_range``."""
    lo, hi = tau_range
    tol = 1e-9 * max(abs(hi), 1.0)
    sel = (curve.taus >= lo - tol) & (curve.taus <= hi + tol) & (curve.sigma_a > 0)
    if sel.sum() < 3:
        raise ConfigurationError(f"need >= 3 curve points in [{lo}, {hi}] s, found {int(sel.sum())}")
    x = np.log(curve.taus[sel])
    y = np.log(curve.snr[sel])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def extrapolate_brightness(curve: AllanCurve, factor: float) -> AllanCurve:
    """Shot-noise scaling with photon flux: ``SNR' = SNR * sqrt(factor)``."""
    if not factor > 0:
        raise ConfigurationError("brightness factor must be positive")
    meta = dict(curve.meta)
    meta["brightness_factor"] = meta.get("brightness_factor", 1.0) * factor
    return AllanCurve(curve.taus, curve.sigma_a / np.sqrt(factor), curve.intervals, meta)


# -- photon flux -----------------------------------------------------------------------


def estimate_photon_flux(
    frame: Interferogram, calib: FluxCalibration, integration_time_s: float | None = None
) -> float:
    """Detected photons per second from the in-band counts of one frame."""
    tau = frame.config.integration_time_s if integration_time_s is None else integration_time_s
    if not tau > 0:
        raise ConfigurationError("integration time must be positive")
    counts = frame.spectrum.values[frame.in_band_mask()].sum()
    return float(counts / calib.gain / tau)


def flux_report(
    frame: Interferogram, calib: FluxCalibration, integration_time_s: float | None = None
) -> dict:
    """Detected and source-referred flux with every factor that went into them."""
    tau = frame.config.integration_time_s if integration_time_s is None else integration_time_s
    detected = estimate_photon_flux(frame, calib, tau)
    mask = frame.in_band_mask()
    return {
        "detected_photons_per_s": detected,
        "source_referred_photons_per_s": detected / (calib.quantum_efficiency * calib.grating_efficiency),
        "in_band_counts": float(frame.spectrum.values[mask].sum()),
        "in_band_pixels": int(mask.sum()),
        "nominal_pixels": calib.bandwidth_nm / calib.pixel_pitch_nm,
        "integration_time_s": float(tau),
        "gain": calib.gain,
        "quantum_efficiency": calib.quantum_efficiency,
        "grating_efficiency": calib.grating_efficiency,
        "pixel_pitch_nm": calib.pixel_pitch_nm,
        "bandwidth_nm": calib.bandwidth_nm,
    }

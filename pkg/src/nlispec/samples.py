"""Synthetic polymer films for closed-loop tests.

Each polymer is a sum of Gaussian C-H stretch bands in absorbance, scaled so
the strongest point reaches a chosen minimum transmission.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .forward import SampleModel
from .spectral import BandLimits, Spectrum

FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))

# (centre cm^-1, FWHM cm^-1, relative height)
POLYMER_BANDS: dict[str, tuple[tuple[float, float, float], ...]] = {
    "PE": ((2915.0, 16.0, 1.0), (2850.0, 12.0, 0.7)),
    "PP": ((2953.0, 14.0, 1.0), (2918.0, 16.0, 0.75), (2838.0, 12.0, 0.45)),
    "PS": ((3025.0, 10.0, 0.45), (2924.0, 18.0, 1.0), (2850.0, 14.0, 0.6)),
}


def band_absorbance(axis, bands) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    out = np.zeros_like(axis)
    for centre, fwhm, height in bands:
        out += height * np.exp(-0.5 * ((axis - centre) / (fwhm / FWHM_PER_SIGMA)) ** 2)
    return out


def polymer_bands(name: str, height_factors=None) -> tuple[tuple[float, float, float], ...]:
    try:
        bands = POLYMER_BANDS[name]
    except KeyError:
        raise ConfigurationError(f"unknown polymer {name!r}; known: {sorted(POLYMER_BANDS)}") from None
    if height_factors is None:
        return bands
    factors = np.asarray(height_factors, dtype=float)
    if factors.shape != (len(bands),) or np.any(factors <= 0):
        raise ConfigurationError(f"{name} needs {len(bands)} positive height factors")
    return tuple((c, w, h * f) for (c, w, h), f in zip(bands, factors))


def polymer_sample(
    name: str,
    band: BandLimits,
    min_transmission: float = 0.3,
    height_factors=None,
    spacing_cm1: float = 0.25,
    margin_cm1: float = 50.0,
) -> tuple[SampleModel, Spectrum]:
    """Sample model and its injected absorbance on a fine idler grid."""
    if not 0 < min_transmission < 1:
        raise ConfigurationError("min_transmission must lie in (0, 1)")
    bands = polymer_bands(name, height_factors)
    n = int(np.ceil((band.width + 2 * margin_cm1) / spacing_cm1)) + 1
    axis = np.linspace(band.lo - margin_cm1, band.hi + margin_cm1, n)
    a = band_absorbance(axis, bands)
    a *= -np.log10(min_transmission) / a.max()
    absorb = Spectrum(axis, a)
    return SampleModel(Spectrum(axis, 10.0 ** (-a))), absorb


def random_height_factors(name: str, rng: np.random.Generator, spread: float = 0.2) -> np.ndarray:
    """Independent uniform height multipliers in ``[1 - spread, 1 + spread]``."""
    return rng.uniform(1.0 - spread, 1.0 + spread, len(polymer_bands(name)))

"""Optional static SVG figures; the CSV outputs remain the data contract.

matplotlib is imported lazily so the rest of the toolkit works without it.
SVGs are written without a timestamp and with a fixed hash salt so reruns
produce identical files.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigurationError("plotting needs matplotlib (pip install 'nlispec[plot]')") from None
    matplotlib.rcParams["svg.hashsalt"] = "nlispec"
    return plt


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    import matplotlib.pyplot as plt

    plt.close(fig)


def plot_absorbance(a, path, title: str | None = None) -> None:
    """Absorbance with a shaded 1-sigma band; saturated points marked."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.fill_between(a.axis, a.values - a.sigma, a.values + a.sigma, alpha=0.3, lw=0, label="±1σ")
    ax.plot(a.axis, a.values, lw=1, label="absorbance")
    if a.saturated.any():
        ax.plot(a.axis[a.saturated], a.values[a.saturated], ".", ms=2, label="saturated")
    ax.set_xlabel("idler wavenumber (cm$^{-1}$)")
    ax.set_ylabel("absorbance")
    ax.invert_xaxis()
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_allan(curve, path, extrapolated=None) -> None:
    """Log-log SNR against averaging time with a sqrt(tau) guide."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(curve.taus, curve.snr, "o-", ms=3, label="measured")
    guide = curve.snr[0] * np.sqrt(curve.taus / curve.taus[0])
    ax.loglog(curve.taus, guide, "--", lw=1, label="∝ √τ")
    if extrapolated is not None:
        ax.loglog(extrapolated.taus, extrapolated.snr, ":", label="brighter source")
    ax.set_xlabel("averaging time (s)")
    ax.set_ylabel("SNR")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_scan(points, path) -> None:
    """Resolution and visibility against OPLD on twin axes."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    opld = [p.opld for p in points]
    ax.plot(opld, [p.fwhm for p in points], "o-", label="FWHM")
    ax.set_xlabel("OPLD (mm)")
    ax.set_ylabel("resolution FWHM (cm$^{-1}$)")
    ax2 = ax.twinx()
    ax2.plot(opld, [100 * p.peak_visibility for p in points], "s--", color="C1", label="visibility")
    ax2.set_ylabel("visibility (%)")
    fig.tight_layout()
    _save(fig, path)


def plot_crystal_curve(lengths_cm, relative, lopt_cm, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(10 * np.asarray(lengths_cm), relative)
    ax.axvline(10 * lopt_cm, ls="--", lw=1)
    ax.set_xlabel("crystal length (mm)")
    ax.set_ylabel("relative SNR")
    fig.tight_layout()
    _save(fig, path)

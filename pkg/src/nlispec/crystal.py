"""Crystal length that maximizes SNR under intrinsic idler absorption.

Pair generation grows with length while the round-trip idler loss removes
visibility, giving a relative SNR of ``sqrt(L) * exp(-alpha*L/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

INVERSE_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class BracketError(ConfigurationError):
    """Search interval does not contain the optimum."""


@dataclass(frozen=True)
class CrystalParams:
    alpha: float  # cm^-1
    length: float  # cm

    def __post_init__(self):
        if not (self.alpha > 0 and self.length > 0):
            raise DomainError("alpha and length must be positive")

    @property
    def relative_snr(self) -> float:
        return float(snr_relative(self.length, self.alpha))


def snr_relative(length, alpha):
    """Unnormalized relative SNR ``sqrt(L) exp(-alpha L / 2)`` (L in cm, alpha in cm^-1)."""
    length = np.asarray(length, dtype=float)
    if np.any(length <= 0) or not alpha > 0:
        raise DomainError("length and alpha must be positive")
    out = np.sqrt(length) * np.exp(-0.5 * alpha * length)
    return float(out) if out.ndim == 0 else out


def optimal_length(alpha: float) -> float:
    """Stationary point of :func:`snr_relative`: ``L_opt = 1/alpha`` (cm)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return 1.0 / alpha


def numeric_optimum(alpha: float, bracket=(0.1, 5.0), tol: float = 1e-9) -> float:
    """Golden-section maximization of :func:`snr_relative` inside ``bracket`` (cm)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    a, b = (float(v) for v in bracket)
    if not 0 < a < b:
        raise BracketError("bracket must satisfy 0 < lo < hi")
    if not a <= 1.0 / alpha <= b:
        raise BracketError(f"bracket ({a}, {b}) cm excludes the optimum at {1.0 / alpha:.6g} cm")
    c = b - INVERSE_GOLDEN * (b - a)
    d = a + INVERSE_GOLDEN * (b - a)
    fc, fd = snr_relative(c, alpha), snr_relative(d, alpha)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INVERSE_GOLDEN * (b - a)
            fc = snr_relative(c, alpha)
        else:
            a, c, fc = c, d, fd
            d = a + INVERSE_GOLDEN * (b - a)
            fd = snr_relative(d, alpha)
    return 0.5 * (a + b)


def snr_curve(alpha: float, lengths_cm=None, n: int = 301, max_length_cm: float | None = None):
    """Relative SNR samples normalized to a peak of 1.

    Returns ``(lengths_cm, normalized_snr)``; the default grid runs to
    ``4/alpha`` (or ``max_length_cm``).
    """
    lopt = optimal_length(alpha)
    if lengths_cm is None:
        top = 4.0 * lopt if max_length_cm is None else float(max_length_cm)
        lengths_cm = np.linspace(top / n, top, n)
    lengths_cm = np.asarray(lengths_cm, dtype=float)
    return lengths_cm, snr_relative(lengths_cm, alpha) / snr_relative(lopt, alpha)

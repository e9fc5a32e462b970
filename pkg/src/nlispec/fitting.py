"""Gaussian-plus-offset least squares with Levenberg-Marquardt damping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError
from .spectral import Spectrum

FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))


@dataclass(frozen=True)
class GaussianFit:
    center: float
    fwhm: float
    amplitude: float
    offset: float
    fit_residual: float
    iterations: int

    @property
    def sigma(self) -> float:
        return self.fwhm / FWHM_PER_SIGMA


def gaussian(x, center, sigma, amplitude, offset):
    return offset + amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def _jacobian(x, center, sigma, amplitude):
    u = (x - center) / sigma
    g = np.exp(-0.5 * u**2)
    return np.column_stack([amplitude * g * u / sigma, amplitude * g * u**2 / sigma, g, np.ones_like(x)])


def _initial_guess(x, y):
    offset = np.median(y)
    dev = y - offset
    i = int(np.argmax(np.abs(dev)))
    amplitude = dev[i]
    half = np.abs(dev) >= 0.5 * abs(amplitude)
    # contiguous half-maximum run around the extremum
    lo = i
    while lo > 0 and half[lo - 1]:
        lo -= 1
    hi = i
    while hi < x.size - 1 and half[hi + 1]:
        hi += 1
    width = max(x[hi] - x[lo], np.min(np.abs(np.diff(x))) if x.size > 1 else 1.0)
    return np.array([x[i], width / FWHM_PER_SIGMA, amplitude, offset])


def gaussian_fwhm_fit(segment: Spectrum, max_iterations: int = 200, tol: float = 1e-12) -> GaussianFit:
    """Fit ``offset + amp*exp(-(x-c)^2/(2 s^2))`` to a segment with one dominant extremum.

    Levenberg-Marquardt damping with multiplicative up/down schedule. Raises
    :class:`FitError` (with the last state as diagnostics) on degenerate input
    or when ``max_iterations`` pass without convergence.
    """
    x = np.asarray(segment.axis, dtype=float)
    y = np.asarray(segment.values, dtype=float)
    ok = np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 5:
        raise FitError("need at least 5 finite points for a Gaussian fit", {"points": int(x.size)})
    scale = max(np.max(np.abs(y)), 1e-300)
    if np.ptp(y) <= 1e-12 * scale:
        raise FitError("segment is flat: no feature to fit", {"ptp": float(np.ptp(y))})
    span = x.max() - x.min()
    step_min = np.min(np.abs(np.diff(np.sort(x))))

    p = _initial_guess(x, y)
    r = y - gaussian(x, *p)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iterations + 1):
        J = _jacobian(x, p[0], p[1], p[2])
        A = J.T @ J
        g = J.T @ r
        accepted = False
        for _ in range(30):
            H = A + lam * np.diag(np.diag(A) + 1e-300)
            try:
                dp = np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + dp
            if not (trial[1] > 0.05 * step_min and trial[1] < 10 * span):
                lam *= 10.0
                continue
            rt = y - gaussian(x, *trial)
            ct = float(rt @ rt)
            if ct <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no damping level lowers the cost: stationary point reached
            return _result(p, cost, x.size, it)
        rel_step = np.max(np.abs(dp) / (np.abs(trial) + 1e-12 * np.array([span, span, scale, scale]) + 1e-300))
        small_gain = cost - ct <= tol * max(cost, 1e-300)
        p, r, cost = trial, rt, ct
        lam = max(lam / 10.0, 1e-12)
        if rel_step < 1e-10 or (small_gain and rel_step < 1e-6) or cost <= 1e-30 * scale**2 * x.size:
            return _result(p, cost, x.size, it)
    raise FitError(
        f"Gaussian fit did not converge in {max_iterations} iterations",
        {"params": p.tolist(), "residual_rms": float(np.sqrt(cost / x.size)), "iterations": max_iterations},
    )


def _result(p, cost, n, it) -> GaussianFit:
    center, sigma, amplitude, offset = (float(v) for v in p)
    diag = {"params": [center, sigma, amplitude, offset], "residual_rms": float(np.sqrt(cost / n))}
    if not np.isfinite(p).all() or sigma <= 0 or amplitude == 0:
        raise FitError("Gaussian fit collapsed", diag)
    return GaussianFit(center, float(FWHM_PER_SIGMA * abs(sigma)), amplitude, offset, float(np.sqrt(cost / n)), it)

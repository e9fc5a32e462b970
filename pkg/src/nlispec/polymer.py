"""Peak picking and band-position matching against a polymer library."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .errors import ConfigurationError, FormatError
from .retrieval import AbsorbanceSpectrum


@dataclass(frozen=True)
class LibraryPeak:
    center_cm1: float
    tolerance_cm1: float = 8.0
    weight: float = 1.0

    def __post_init__(self):
        if not self.tolerance_cm1 > 0 or not self.weight > 0:
            raise ConfigurationError("library tolerance and weight must be positive")


@dataclass(frozen=True)
class PeakLibrary:
    entries: dict[str, tuple[LibraryPeak, ...]]

    def __post_init__(self):
        if not self.entries:
            raise ConfigurationError("peak library is empty")
        clean = {}
        for name in sorted(self.entries):
            peaks = tuple(self.entries[name])
            if not peaks:
                raise ConfigurationError(f"library entry {name!r} has no peaks")
            clean[str(name)] = peaks
        object.__setattr__(self, "entries", clean)

    @property
    def names(self) -> list[str]:
        return list(self.entries)


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    width: float
    snr: float
    saturated: bool = False


@dataclass(frozen=True)
class PeakList:
    peaks: tuple[Peak, ...] = ()

    def __len__(self) -> int:
        return len(self.peaks)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.peaks], dtype=float)


@dataclass(frozen=True)
class PeakMatch:
    library_center: float
    detected_position: float | None
    contribution: float
    weight: float


@dataclass(frozen=True)
class IdentificationResult:
    scores: tuple[tuple[str, float], ...]
    matches: dict[str, tuple[PeakMatch, ...]] = field(default_factory=dict)
    decision: str | None = None
    threshold: float = 0.6

    @property
    def top(self) -> str:
        return self.scores[0][0]

    def score(self, name: str) -> float:
        return dict(self.scores)[name]


def builtin_library(tolerance_cm1: float = 8.0) -> PeakLibrary:
    """PS, PP and PE C-H stretch bands; the aromatic PS band counts double."""
    t = tolerance_cm1
    return PeakLibrary({
        "PE": (LibraryPeak(2915.0, t), LibraryPeak(2850.0, t)),
        "PP": (LibraryPeak(2953.0, t), LibraryPeak(2918.0, t), LibraryPeak(2838.0, t)),
        "PS": (LibraryPeak(3025.0, t, 2.0), LibraryPeak(2924.0, t), LibraryPeak(2850.0, t)),
    })


def _refine(x: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through three samples around index ``i``."""
    if i == 0 or i == y.size - 1:
        return float(x[i]), float(y[i])
    x0, x1, x2 = x[i - 1: i + 2]
    y0, y1, y2 = y[i - 1: i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a >= 0:
        return float(x1), float(y1)
    xv = -b / (2 * a)
    if not x0 <= xv <= x2:
        return float(x1), float(y1)
    c = y1 - a * x1**2 - b * x1
    return float(xv), float(a * xv**2 + b * xv + c)


def detect_peaks(a: AbsorbanceSpectrum, min_snr: float = 3.0, min_prominence: float = 0.05) -> PeakList:
    """Local absorbance maxima passing prominence and height/sigma gates.

    Peaks on saturated points are kept if prominent enough, with
    ``saturated=True`` marking the height as unreliable.
    """
    y = np.asarray(a.values, dtype=float)
    x = np.asarray(a.axis, dtype=float)
    if y.size < 3:
        return PeakList()
    idx, props = find_peaks(y, prominence=min_prominence)
    if idx.size == 0:
        return PeakList()
    widths = peak_widths(y, idx, rel_height=0.5, prominence_data=(
        props["prominences"], props["left_bases"], props["right_bases"]))[0]
    step = np.gradient(x)
    out = []
    for k, i in enumerate(idx):
        pos, height = _refine(x, y, int(i))
        if height <= 0:
            continue
        sat = bool(a.saturated[i])
        sig = a.sigma[i]
        snr = float(height / sig) if sig > 0 else float("inf")
        if snr < min_snr and not sat:
            continue
        out.append(Peak(pos, height, float(widths[k] * step[i]), snr, sat))
    return PeakList(tuple(out))


def _greedy_pairs(lib_peaks, positions):
    """One-to-one assignment by increasing distance within tolerance."""
    cand = []
    for i, lp in enumerate(lib_peaks):
        for j, p in enumerate(positions):
            d = abs(p - lp.center_cm1)
            if d < lp.tolerance_cm1:
                cand.append((d, i, j))
    cand.sort()
    used_lib, used_det, pairs = set(), set(), {}
    for d, i, j in cand:
        if i in used_lib or j in used_det:
            continue
        used_lib.add(i)
        used_det.add(j)
        pairs[i] = j
    return pairs


def match_polymer(peaks: PeakList, lib: PeakLibrary, threshold: float = 0.6) -> IdentificationResult:
    """Score each polymer by weighted triangular position agreement.

    ``score = sum(w * max(0, 1 - |d|/tol)) / sum(w)``; exact ties rank by name.
    The decision is the top polymer when its score reaches ``threshold``.
    """
    positions = peaks.positions
    scored, matches = [], {}
    for name, lib_peaks in lib.entries.items():
        pairs = _greedy_pairs(lib_peaks, positions)
        report, total = [], 0.0
        for i, lp in enumerate(lib_peaks):
            if i in pairs:
                pos = float(positions[pairs[i]])
                c = lp.weight * max(0.0, 1.0 - abs(pos - lp.center_cm1) / lp.tolerance_cm1)
                report.append(PeakMatch(lp.center_cm1, pos, c, lp.weight))
            else:
                c = 0.0
                report.append(PeakMatch(lp.center_cm1, None, 0.0, lp.weight))
            total += c
        score = total / sum(lp.weight for lp in lib_peaks)
        scored.append((name, float(min(max(score, 0.0), 1.0))))
        matches[name] = tuple(report)
    scored.sort(key=lambda t: (-t[1], t[0]))
    decision = scored[0][0] if scored[0][1] >= threshold else None
    return IdentificationResult(tuple(scored), matches, decision, threshold)


# -- library files ---------------------------------------------------------------------


def library_to_dict(lib: PeakLibrary) -> dict:
    return {
        name: [
            {"peak": {"center_cm1": p.center_cm1, "tolerance_cm1": p.tolerance_cm1, "weight": p.weight}}
            for p in peaks
        ]
        for name, peaks in lib.entries.items()
    }


def library_from_dict(data) -> PeakLibrary:
    if not isinstance(data, dict) or not data:
        raise FormatError("library file must map polymer names to peak lists")
    entries = {}
    for name, items in data.items():
        if not isinstance(items, list):
            raise FormatError(f"library entry {name!r} must be a list of peaks")
        peaks = []
        for item in items:
            spec = item.get("peak") if isinstance(item, dict) else None
            if not isinstance(spec, dict) or "center_cm1" not in spec:
                raise FormatError(f"library entry {name!r}: each item needs peak: {{center_cm1, ...}}")
            peaks.append(LibraryPeak(
                float(spec["center_cm1"]),
                float(spec.get("tolerance_cm1", 8.0)),
                float(spec.get("weight", 1.0)),
            ))
        entries[str(name)] = tuple(peaks)
    return PeakLibrary(entries)

"""File formats: spectrum, interferogram and product CSVs, YAML configs, manifests.

Floats are written with ``repr`` (shortest round-tripping form) so reruns
are byte-identical and every CSV reads back to the exact same values.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import FormatError
from .forward import AcquisitionConfig, Interferogram
from .noise import AllanCurve
from .retrieval import AbsorbanceSpectrum
from .spectral import AxisKind, Spectrum


def fmt(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class RunManifest:
    """Provenance written into every output file."""

    subcommand: str
    config_path: str | None = None
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    seed: int | None = None
    version: str = __version__
    config_hash: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        d["inputs"] = list(self.inputs)
        d["outputs"] = list(self.outputs)
        return d

    def comment(self) -> str:
        return "# manifest=" + canonical_json(self.as_dict())


def _write_text(path, lines: list[str]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _comments(lines) -> dict:
    out = {}
    for line in lines:
        if line.startswith("#") and "=" in line:
            key, _, value = line[1:].strip().partition("=")
            out[key.strip()] = value.strip()
    return out


def _rows(lines, header: list[str], path) -> list[list[str]]:
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not body:
        return []
    first = [c.strip() for c in body[0].split(",")]
    if first == header:
        body = body[1:]
    rows = []
    for n, ln in enumerate(body, 1):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != len(header):
            raise FormatError(f"{path}: row {n} has {len(cells)} columns, expected {len(header)}")
        rows.append(cells)
    return rows


def _floats(rows, col, path) -> np.ndarray:
    try:
        return np.array([float(r[col]) for r in rows], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric value ({exc})") from None


# -- spectra and interferograms ----------------------------------------------------------


def write_spectrum_csv(path, s: Spectrum, manifest: RunManifest | None = None, metadata: dict | None = None):
    lines = [f"# axis_kind={s.axis_kind.value}"]
    if metadata is not None:
        lines.append("# metadata=" + canonical_json(metadata))
    if manifest is not None:
        lines.append(manifest.comment())
    lines.append("axis,value")
    lines += [f"{fmt(a)},{fmt(v)}" for a, v in zip(s.axis, s.values)]
    _write_text(path, lines)


def read_spectrum_csv(path) -> tuple[Spectrum, dict]:
    """Spectrum plus the parsed ``# key=value`` header fields."""
    lines = _read_lines(path)
    head = _comments(lines)
    if "axis_kind" not in head:
        raise FormatError(f"{path}: missing '# axis_kind=' header")
    try:
        kind = AxisKind(head["axis_kind"])
    except ValueError:
        raise FormatError(f"{path}: unknown axis_kind {head['axis_kind']!r}") from None
    rows = _rows(lines, ["axis", "value"], path)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return Spectrum(_floats(rows, 0, path), _floats(rows, 1, path), kind), head


def interferogram_metadata(frame: Interferogram) -> dict:
    return {
        "config": asdict(frame.config),
        "pump_wavelength_nm": frame.pump_wavelength_nm,
        "signal_band_nm": list(frame.signal_band_nm),
        "frame": dict(frame.metadata),
    }


def write_interferogram_csv(path, frame: Interferogram, manifest: RunManifest | None = None):
    write_spectrum_csv(path, frame.spectrum, manifest, interferogram_metadata(frame))


def read_interferogram_csv(path) -> Interferogram:
    s, head = read_spectrum_csv(path)
    if "metadata" not in head:
        raise FormatError(f"{path}: missing '# metadata=' block with the acquisition config")
    try:
        meta = json.loads(head["metadata"])
        names = {f.name for f in fields(AcquisitionConfig)}
        cfg = AcquisitionConfig(**{k: v for k, v in meta["config"].items() if k in names})
        return Interferogram(
            s, cfg, float(meta["pump_wavelength_nm"]), tuple(meta["signal_band_nm"]), meta.get("frame", {})
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed metadata block ({exc})") from None


# -- products ------------------------------------------------------------------------------

ABSORBANCE_HEADER = ["wavenumber_cm1", "absorbance", "sigma", "saturated"]
ALLAN_HEADER = ["tau_s", "sigma_a", "snr"]
SCAN_HEADER = ["opld_mm", "fwhm_cm1", "visibility"]
CURVE_HEADER = ["length_mm", "relative_snr"]


def _table(path, header, columns, manifest):
    lines = [] if manifest is None else [manifest.comment()]
    lines.append(",".join(header))
    for row in zip(*columns):
        lines.append(",".join(row))
    _write_text(path, lines)


def write_absorbance_csv(path, a: AbsorbanceSpectrum, manifest: RunManifest | None = None):
    _table(path, ABSORBANCE_HEADER, [
        [fmt(v) for v in a.axis], [fmt(v) for v in a.values], [fmt(v) for v in a.sigma],
        ["1" if f else "0" for f in a.saturated],
    ], manifest)


def read_absorbance_csv(path) -> AbsorbanceSpectrum:
    rows = _rows(_read_lines(path), ABSORBANCE_HEADER, path)
    if not rows:
        return AbsorbanceSpectrum(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool))
    sat = []
    for r in rows:
        if r[3] not in ("0", "1"):
            raise FormatError(f"{path}: saturated column must be 0 or 1")
        sat.append(r[3] == "1")
    return AbsorbanceSpectrum(_floats(rows, 0, path), _floats(rows, 1, path), _floats(rows, 2, path), np.array(sat))


def write_allan_csv(path, curve: AllanCurve, manifest: RunManifest | None = None):
    _table(path, ALLAN_HEADER, [
        [fmt(v) for v in curve.taus], [fmt(v) for v in curve.sigma_a], [fmt(v) for v in curve.snr],
    ], manifest)


def read_allan_csv(path) -> AllanCurve:
    rows = _rows(_read_lines(path), ALLAN_HEADER, path)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return AllanCurve(_floats(rows, 0, path), _floats(rows, 1, path))


def write_scan_csv(path, points, manifest: RunManifest | None = None):
    _table(path, SCAN_HEADER, [
        [fmt(p.opld) for p in points], [fmt(p.fwhm) for p in points], [fmt(p.peak_visibility) for p in points],
    ], manifest)


def read_scan_csv(path) -> list[tuple[float, float, float]]:
    rows = _rows(_read_lines(path), SCAN_HEADER, path)
    cols = [_floats(rows, i, path) for i in range(3)]
    return [tuple(float(c[i]) for c in cols) for i in range(len(rows))]


def write_curve_csv(path, lengths_cm, relative, manifest: RunManifest | None = None):
    _table(path, CURVE_HEADER, [[fmt(10.0 * v) for v in lengths_cm], [fmt(v) for v in relative]], manifest)


def read_curve_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = _rows(_read_lines(path), CURVE_HEADER, path)
    return _floats(rows, 0, path), _floats(rows, 1, path)


# -- structured text ----------------------------------------------------------------------


def write_json(path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, default=_json_default, allow_nan=True)
    _write_text(path, [text])


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def read_yaml(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: invalid YAML ({exc})") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise FormatError(f"{path}: top level must be a mapping")
    return data


def write_yaml(path, data: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(data, fh, sort_keys=True, default_flow_style=None)

"""Scenario and analysis configs loaded from YAML mappings.

Every section maps onto one dataclass; unknown keys are rejected so typos
surface as configuration errors instead of silently using defaults.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .calibration import OpldScanConfig, ScanContext
from .errors import ConfigurationError
from .forward import (
    AcquisitionConfig,
    SampleModel,
    SourceModel,
    VisibilityModel,
    linear_drift,
)
from .retrieval import RetrievalConfig
from .samples import polymer_sample
from .spectral import BandLimits, EnvelopeFilter


def _build(cls, section: dict | None, where: str):
    section = {} if section is None else section
    if not isinstance(section, dict):
        raise ConfigurationError(f"'{where}' must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(section) - names)
    if unknown:
        raise ConfigurationError(f"unknown keys in '{where}': {', '.join(unknown)}")
    kinds = {f.name: str(f.type) for f in fields(cls)}
    section = {k: _as_float(v, kinds[k], f"{where}.{k}") for k, v in section.items()}
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigurationError(f"'{where}': {exc}") from None


def _as_float(value, kind: str, where: str):
    # YAML 1.1 reads exponents without a dot (3.6e7) as strings
    if isinstance(value, str) and kind.startswith("float"):
        try:
            return float(value)
        except ValueError:
            raise ConfigurationError(f"'{where}' must be a number, got {value!r}") from None
    return value


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown keys in '{where}': {', '.join(unknown)}")


def _bands(items, where: str) -> tuple[BandLimits, ...]:
    out = []
    for item in items or ():
        try:
            lo, hi = (float(v) for v in item)
        except (TypeError, ValueError):
            raise ConfigurationError(f"'{where}' entries must be [lo, hi] pairs") from None
        out.append(BandLimits(lo, hi))
    return tuple(out)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate a burst of frames."""

    source: SourceModel = field(default_factory=SourceModel)
    visibility: VisibilityModel | None = None
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    sample: dict = field(default_factory=lambda: {"kind": "transparent"})
    frames: int = 200
    drift_per_s: float = 0.0
    noise: bool = True

    def visibility_model(self) -> VisibilityModel:
        if self.visibility is not None:
            return self.visibility
        return VisibilityModel.from_observed(0.185, 0.05, 1.45, self.acquisition)

    def sample_model(self) -> SampleModel:
        return build_sample(self.sample, self.source)

    def drift(self):
        if self.drift_per_s == 0:
            return None
        return linear_drift(self.frames, self.acquisition.integration_time_s, self.drift_per_s)


def build_sample(spec: dict, src: SourceModel) -> SampleModel:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("'sample' needs a 'kind' (transparent, constant or polymer)")
    kind = spec["kind"]
    band = src.idler_band
    if kind == "transparent":
        _check_keys(spec, {"kind"}, "sample")
        return SampleModel.transparent(band)
    if kind == "constant":
        _check_keys(spec, {"kind", "transmission"}, "sample")
        return SampleModel.constant(float(spec.get("transmission", 1.0)), band)
    if kind == "polymer":
        _check_keys(spec, {"kind", "name", "min_transmission", "height_factors"}, "sample")
        if "name" not in spec:
            raise ConfigurationError("polymer sample needs 'name'")
        model, _ = polymer_sample(
            str(spec["name"]), band, float(spec.get("min_transmission", 0.3)), spec.get("height_factors")
        )
        return model
    raise ConfigurationError(f"unknown sample kind {kind!r}")


def parse_sample_flag(text: str) -> dict:
    """``transparent``, ``constant:0.5`` or ``polymer:PS[:min_T]``."""
    parts = text.split(":")
    try:
        if parts[0] == "transparent" and len(parts) == 1:
            return {"kind": "transparent"}
        if parts[0] == "constant" and len(parts) == 2:
            return {"kind": "constant", "transmission": float(parts[1])}
        if parts[0] == "polymer" and len(parts) in (2, 3):
            out = {"kind": "polymer", "name": parts[1]}
            if len(parts) == 3:
                out["min_transmission"] = float(parts[2])
            return out
    except ValueError:
        pass
    raise ConfigurationError(f"cannot parse sample {text!r}; use transparent, constant:T or polymer:NAME[:minT]")


def _visibility(section: dict | None, acq: AcquisitionConfig) -> VisibilityModel | None:
    if section is None:
        return None
    section = dict(section)
    if "observed_visibility" in section:
        _check_keys(section, {"observed_visibility", "observed_floor", "opld_mm", "dip_center_cm1",
                              "dip_fwhm_cm1"}, "visibility")
        obs = float(section.pop("observed_visibility"))
        floor = float(section.pop("observed_floor", 0.05))
        opld = float(section.pop("opld_mm", 1.45))
        return VisibilityModel.from_observed(obs, floor, opld, acq, **section)
    return _build(VisibilityModel, section, "visibility")


def scenario_from_dict(data: dict) -> Scenario:
    _check_keys(data, {"source", "visibility", "acquisition", "sample", "frames", "drift_per_s", "noise",
                       "seed"}, "scenario")
    src_section = dict(data.get("source") or {})
    if "signal_band_nm" in src_section:
        src_section["signal_band_nm"] = tuple(src_section["signal_band_nm"])
    src = _build(SourceModel, src_section, "source")
    acq_section = dict(data.get("acquisition") or {})
    if "seed" in data:
        acq_section["rng_seed"] = int(data["seed"])
    acq = _build(AcquisitionConfig, acq_section, "acquisition")
    frames = int(data.get("frames", 200))
    if frames < 1:
        raise ConfigurationError(f"frames must be >= 1, got {frames}")
    sc = Scenario(
        src, _visibility(data.get("visibility"), acq), acq, dict(data.get("sample") or {"kind": "transparent"}),
        frames, float(data.get("drift_per_s", 0.0)), bool(data.get("noise", True)),
    )
    sc.sample_model()  # validate early
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    """Effective configuration, used for hashing and provenance."""
    src = asdict(sc.source)
    src["spectral_shape"] = sc.source.spectral_shape.value
    src["signal_band_nm"] = list(sc.source.signal_band_nm)
    return {
        "source": src,
        "visibility": asdict(sc.visibility_model()),
        "acquisition": asdict(sc.acquisition),
        "sample": dict(sc.sample),
        "frames": sc.frames,
        "drift_per_s": sc.drift_per_s,
        "noise": sc.noise,
    }


def retrieval_from_dict(data: dict | None) -> RetrievalConfig:
    data = dict(data or {})
    _check_keys(data, {f.name for f in fields(RetrievalConfig)}, "retrieval")
    if "analysis_band" in data and data["analysis_band"] is not None:
        data["analysis_band"] = _bands([data["analysis_band"]], "analysis_band")[0]
    if "baseline_regions" in data:
        data["baseline_regions"] = _bands(data["baseline_regions"], "baseline_regions")
    if "envelope_filter" in data:
        flt = dict(data["envelope_filter"] or {})
        if flt.get("passband") is not None:
            flt["passband"] = tuple(float(v) for v in flt["passband"])
        data["envelope_filter"] = _build(EnvelopeFilter, flt, "envelope_filter")
    return _build(RetrievalConfig, data, "retrieval")


def retrieval_to_dict(cfg: RetrievalConfig) -> dict:
    d = asdict(cfg)
    d["analysis_band"] = None if cfg.analysis_band is None else [cfg.analysis_band.lo, cfg.analysis_band.hi]
    d["baseline_regions"] = [[b.lo, b.hi] for b in cfg.baseline_regions]
    return d


def scan_from_dict(data: dict | None) -> tuple[OpldScanConfig, ScanContext]:
    data = dict(data or {})
    _check_keys(data, {"scan", "source", "acquisition", "base_visibility", "dip_floor", "noise",
                       "retrieval"}, "calibrate-opld config")
    scan = dict(data.get("scan") or {})
    if "oplds" in scan:
        scan["oplds"] = tuple(scan["oplds"])
    cfg = _build(OpldScanConfig, scan, "scan")
    src_section = dict(data.get("source") or {})
    if "signal_band_nm" in src_section:
        src_section["signal_band_nm"] = tuple(src_section["signal_band_nm"])
    ctx = ScanContext(
        _build(SourceModel, src_section, "source"),
        _build(AcquisitionConfig, data.get("acquisition"), "acquisition"),
        data.get("base_visibility"),
        float(data.get("dip_floor", 0.05)),
        retrieval_from_dict(data.get("retrieval")),
        bool(data.get("noise", False)),
    )
    return cfg, ctx


def jsonable(obj):
    """Recursively convert tuples, numpy scalars and enums for hashing."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str, bool)):
        return obj.value
    return obj

"""``nlispec`` command-line front end.

Config files override built-in defaults and flags override config files.
Relative config paths that do not exist are looked up in the directory
named by ``NLISPEC_CONFIG_DIR``; when no ``--config`` is given, a file
``<subcommand>.yaml`` in that directory is used if present.

Exit codes: 0 success, 2 configuration error, 3 I/O or format error,
4 numerical failure. Data and output paths go to stdout, diagnostics to
stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as nio
from .calibration import opld_scan
from .crystal import optimal_length, snr_curve
from .errors import ConfigurationError, FitError, FormatError, ReferenceInvalidError
from .forward import simulate_burst, simulate_frame
from .noise import CRYSTAL_EXCLUSION, FluxCalibration, FrameSeries, allan_deviation, extrapolate_brightness
from .noise import fit_scaling_exponent, flux_report
from .polymer import builtin_library, detect_peaks, library_from_dict, library_to_dict, match_polymer
from .retrieval import retrieve
from .scenario import (
    jsonable,
    parse_sample_flag,
    retrieval_from_dict,
    retrieval_to_dict,
    scan_from_dict,
    scenario_from_dict,
    scenario_to_dict,
)
from .spectral import BandLimits

CONFIG_DIR_ENV = "NLISPEC_CONFIG_DIR"
FRAME_GLOB = "frame_*.csv"

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("nlispec")


# -- helpers -----------------------------------------------------------------------------


def resolve_config(path: str | None, subcommand: str) -> Path | None:
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if path is None:
        if env_dir:
            candidate = Path(env_dir) / f"{subcommand}.yaml"
            if candidate.is_file():
                return candidate
        return None
    p = Path(path)
    if p.is_file():
        return p
    if env_dir and not p.is_absolute() and (Path(env_dir) / p).is_file():
        return Path(env_dir) / p
    raise FileNotFoundError(f"config file not found: {path}")


def load_config(args, subcommand: str) -> tuple[dict, str | None]:
    path = resolve_config(getattr(args, "config", None), subcommand)
    if path is None:
        return {}, None
    return nio.read_yaml(path), str(path)


def parse_band(text: str) -> BandLimits:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigurationError(f"band {text!r} must look like LO:HI") from None
    return BandLimits(lo, hi)


def parse_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated list of numbers, got {text!r}") from None


def manifest(args, subcommand, config_path, effective, inputs=(), outputs=(), seed=None) -> nio.RunManifest:
    return nio.RunManifest(
        subcommand=subcommand,
        config_path=config_path,
        inputs=tuple(str(p) for p in inputs),
        outputs=tuple(str(p) for p in outputs),
        seed=seed,
        version=__version__,
        config_hash=nio.config_hash(jsonable(effective)),
    )


def frame_files(directory: str) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"frame directory not found: {directory}")
    return sorted(d.glob(FRAME_GLOB))


def emit(text: str) -> None:
    sys.stdout.write(text + "\n")


# -- subcommands ------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    data, cpath = load_config(args, "simulate")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.frames is not None:
        data["frames"] = args.frames
    if args.sample is not None:
        data["sample"] = parse_sample_flag(args.sample)
    if args.noiseless:
        data["noise"] = False
    if args.drift_per_s is not None:
        data["drift_per_s"] = args.drift_per_s
    sc = scenario_from_dict(data)
    src, vis, sample, acq = sc.source, sc.visibility_model(), sc.sample_model(), sc.acquisition
    if sc.noise:
        frames = simulate_burst(src, vis, sample, acq, sc.frames, sc.drift())
    else:
        one = simulate_frame(src, vis, sample, acq, noise=False)
        frames = [one] * sc.frames
    out = Path(args.out)
    effective = scenario_to_dict(sc)
    man = manifest(args, "simulate", cpath, effective, outputs=[out], seed=acq.rng_seed)
    for k, frame in enumerate(frames):
        nio.write_interferogram_csv(out / f"frame_{k:04d}.csv", frame, man)
    nio.write_json(out / "manifest.json", {"manifest": man.as_dict(), "config": effective, "frames": len(frames)})
    log.info("wrote %d frames", len(frames))
    emit(str(out))
    return EXIT_OK


def cmd_retrieve(args) -> int:
    data, cpath = load_config(args, "retrieve")
    rdata = dict(data.get("retrieval", data))
    if args.baseline_region:
        rdata["baseline_regions"] = [[b.lo, b.hi] for b in map(parse_band, args.baseline_region)]
    if args.baseline_order is not None:
        rdata["baseline_order"] = args.baseline_order
    if args.seed is not None:
        rdata["seed"] = args.seed
    cfg = retrieval_from_dict(rdata)
    sample = nio.read_interferogram_csv(args.sample)
    reference = nio.read_interferogram_csv(args.reference)
    inputs = [args.sample, args.reference]
    burst = None
    if args.reference_burst:
        ref_path = Path(args.reference).resolve()
        files = [f for f in frame_files(args.reference_burst) if f.resolve() != ref_path]
        if len(files) < 2:
            raise ConfigurationError("reference burst needs at least two frames besides the reference")
        burst = [nio.read_interferogram_csv(f) for f in files]
        inputs.append(args.reference_burst)
    a = retrieve(sample, reference, cfg, burst)
    out = Path(args.out)
    summary_path = Path(args.summary) if args.summary else out.with_suffix(".json")
    outputs = [out, summary_path] + ([args.plot] if args.plot else [])
    man = manifest(args, "retrieve", cpath, retrieval_to_dict(cfg), inputs, outputs, cfg.seed)
    nio.write_absorbance_csv(out, a, man)
    peaks = detect_peaks(a, args.min_snr)
    nio.write_json(summary_path, {
        "manifest": man.as_dict(),
        "points": int(a.axis.size),
        "saturated_points": int(a.saturated.sum()),
        "band_cm1": [float(a.axis[0]), float(a.axis[-1])],
        "max_absorbance": float(np.max(a.values)),
        "median_sigma": float(np.median(a.sigma)),
        "noise_source": "reference burst" if burst else "bootstrap",
        "peaks": [
            {"position_cm1": p.position, "height": p.height, "width_cm1": p.width, "snr": p.snr,
             "saturated": p.saturated}
            for p in peaks.peaks
        ],
    })
    if args.plot:
        from .plotting import plot_absorbance

        plot_absorbance(a, args.plot)
    emit(str(out))
    emit(str(summary_path))
    return EXIT_OK


def default_taus(n_frames: int, base: float) -> list[float]:
    blocks = sorted({int(round(b)) for b in np.geomspace(1, max(n_frames // 2, 1), 16)})
    return [b * base for b in blocks]


def cmd_allan(args) -> int:
    data, cpath = load_config(args, "allan")
    files = frame_files(args.frames)
    if len(files) < 2:
        raise ConfigurationError(f"Allan analysis needs at least 2 frames, found {len(files)} in {args.frames}")
    frames = [nio.read_interferogram_csv(f) for f in files]
    series = FrameSeries.from_interferograms(frames)
    if args.taus:
        taus = parse_floats(args.taus)
    elif "taus" in data:
        taus = [float(t) for t in data["taus"]]
    else:
        taus = default_taus(series.n_frames, series.base_integration_time)
    if args.exclude:
        exclude = tuple(parse_band(b) for b in args.exclude)
    elif args.no_exclude:
        exclude = ()
    else:
        exclude = tuple(BandLimits(*b) for b in data["exclude"]) if "exclude" in data else CRYSTAL_EXCLUSION
    scalar = args.scalarization or data.get("scalarization", "pixel")
    curve = allan_deviation(series, taus, exclude=exclude, scalarization=scalar)
    effective = {"taus": list(curve.taus), "exclude": [[b.lo, b.hi] for b in exclude], "scalarization": scalar}
    out = Path(args.out)
    outputs = [out] + ([args.brightness_out] if args.brightness_out else []) + ([args.plot] if args.plot else [])
    man = manifest(args, args.subcommand, cpath, effective, [args.frames], outputs)
    nio.write_allan_csv(out, curve, man)
    extra = None
    if args.brightness is not None:
        extra = extrapolate_brightness(curve, args.brightness)
        if args.brightness_out:
            nio.write_allan_csv(args.brightness_out, extra, man)
    if len(curve.taus) >= 3:
        try:
            slope = fit_scaling_exponent(curve, (curve.taus[0], curve.taus[-1]))
            log.info("SNR scaling exponent over the full range: %.3f", slope)
        except ConfigurationError:
            pass
    if args.plot:
        from .plotting import plot_allan

        plot_allan(curve, args.plot, extra)
    emit(str(out))
    return EXIT_OK


def cmd_calibrate_opld(args) -> int:
    data, cpath = load_config(args, "calibrate-opld")
    if args.oplds:
        data.setdefault("scan", {})["oplds"] = parse_floats(args.oplds)
    if args.noise:
        data["noise"] = True
    if args.frames_per_point is not None:
        data.setdefault("scan", {})["frames_per_point"] = args.frames_per_point
    if args.seed is not None:
        data.setdefault("scan", {})["seed"] = args.seed
    cfg, ctx = scan_from_dict(data)
    points = opld_scan(cfg, ctx)
    effective = {"scan": cfg.__dict__, "noise": ctx.noise, "base_visibility": ctx.intrinsic_visibility(),
                 "instrument_response_fwhm_nm": ctx.acquisition.instrument_response_fwhm_nm}
    out = Path(args.out)
    man = manifest(args, "calibrate-opld", cpath, effective, (), [out] + ([args.plot] if args.plot else []),
                   cfg.seed)
    nio.write_scan_csv(out, points, man)
    if args.plot:
        from .plotting import plot_scan

        plot_scan(points, args.plot)
    emit(str(out))
    flagged = [p for p in points if p.flagged]
    for p in flagged:
        sys.stderr.write(f"nlispec: fit failed at OPLD {p.opld} mm: {p.diagnostics}\n")
    return EXIT_NUMERIC if flagged else EXIT_OK


def cmd_identify(args) -> int:
    data, cpath = load_config(args, "identify")
    library_path = args.library or data.get("library")
    lib = library_from_dict(nio.read_yaml(library_path)) if library_path else builtin_library()
    if args.write_library:
        nio.write_yaml(args.write_library, library_to_dict(lib))
    if args.absorbance is None:
        if args.write_library:
            emit(str(args.write_library))
            return EXIT_OK
        raise ConfigurationError("identify needs --absorbance (or --write-library)")
    threshold = args.threshold if args.threshold is not None else float(data.get("threshold", 0.6))
    min_snr = args.min_snr if args.min_snr is not None else float(data.get("min_snr", 2.0))
    min_prom = args.min_prominence if args.min_prominence is not None else float(data.get("min_prominence", 0.05))
    a = nio.read_absorbance_csv(args.absorbance)
    peaks = detect_peaks(a, min_snr, min_prom)
    result = match_polymer(peaks, lib, threshold)
    effective = {"library": library_to_dict(lib), "threshold": threshold, "min_snr": min_snr,
                 "min_prominence": min_prom}
    man = manifest(args, "identify", cpath, effective, [args.absorbance], [args.out] if args.out else [])
    report = {
        "manifest": man.as_dict(),
        "decision": result.decision,
        "threshold": result.threshold,
        "scores": [{"polymer": n, "score": s} for n, s in result.scores],
        "peaks": [{"position_cm1": p.position, "height": p.height, "snr": p.snr, "saturated": p.saturated}
                  for p in peaks.peaks],
        "matches": {
            name: [{"library_cm1": m.library_center, "detected_cm1": m.detected_position,
                    "contribution": m.contribution, "weight": m.weight} for m in ms]
            for name, ms in result.matches.items()
        },
    }
    if args.out:
        nio.write_json(args.out, report)
        emit(str(args.out))
    else:
        import json

        emit(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_optimize_crystal(args) -> int:
    lopt = optimal_length(args.alpha)
    lengths, rel = snr_curve(args.alpha, n=args.points,
                             max_length_cm=None if args.max_length_mm is None else args.max_length_mm / 10.0)
    emit(f"L_opt = {10.0 * lopt:.2f} mm")
    effective = {"alpha": args.alpha, "points": args.points, "max_length_mm": args.max_length_mm}
    outputs = ([args.out] if args.out else []) + ([args.plot] if args.plot else [])
    man = manifest(args, "optimize-crystal", None, effective, (), outputs)
    if args.out:
        nio.write_curve_csv(args.out, lengths, rel, man)
        emit(str(args.out))
    else:
        emit(",".join(nio.CURVE_HEADER))
        for length, r in zip(lengths, rel):
            emit(f"{nio.fmt(10.0 * length)},{nio.fmt(r)}")
    if args.plot:
        from .plotting import plot_crystal_curve

        plot_crystal_curve(lengths, rel, lopt, args.plot)
    return EXIT_OK


def cmd_flux(args) -> int:
    data, cpath = load_config(args, "flux")
    frame = nio.read_interferogram_csv(args.frame)
    calib = FluxCalibration.from_config(frame.config)
    overrides = dict(data.get("calibration", {}))
    if args.bandwidth_nm is not None:
        overrides["bandwidth_nm"] = args.bandwidth_nm
    if overrides:
        try:
            calib = replace(calib, **overrides)
        except TypeError as exc:
            raise ConfigurationError(f"calibration: {exc}") from None
    report = flux_report(frame, calib, args.integration_time)
    man = manifest(args, "flux", cpath, calib.__dict__, [args.frame], [args.out] if args.out else [])
    report["manifest"] = man.as_dict()
    if args.out:
        nio.write_json(args.out, report)
        emit(str(args.out))
    else:
        import json

        emit(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlispec", description="Undetected-photon spectroscopy toolkit.")
    p.add_argument("--version", action="version", version=f"nlispec {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("simulate", help="simulate a burst of interferogram frames")
    s.add_argument("--config", help="scenario YAML")
    s.add_argument("--out", required=True, help="output directory for frame_NNNN.csv files")
    s.add_argument("--frames", type=int, help="number of frames (default 200)")
    s.add_argument("--seed", type=int, help="base RNG seed; frame k uses seed + k")
    s.add_argument("--sample", help="transparent | constant:T | polymer:NAME[:minT]")
    s.add_argument("--noiseless", action="store_true", help="write expected counts without shot noise")
    s.add_argument("--drift-per-s", type=float, help="linear source-power drift rate (1/s)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("retrieve", help="absorbance spectrum from a sample and a reference frame")
    r.add_argument("--sample", required=True)
    r.add_argument("--reference", required=True)
    r.add_argument("--reference-burst", help="directory of reference frames for the noise estimate")
    r.add_argument("--config", help="retrieval YAML")
    r.add_argument("--baseline-region", action="append", metavar="LO:HI", help="idler cm^-1, repeatable")
    r.add_argument("--baseline-order", type=int)
    r.add_argument("--seed", type=int, help="bootstrap seed")
    r.add_argument("--min-snr", type=float, default=2.0, help="peak gate for the summary")
    r.add_argument("--out", required=True, help="absorbance CSV")
    r.add_argument("--summary", help="summary JSON (default: next to --out)")
    r.add_argument("--plot", help="SVG with a ±1σ band")
    r.set_defaults(func=cmd_retrieve)

    for name in ("allan", "snr-scan"):
        a = sub.add_parser(name, help="Allan deviation and SNR against averaging time")
        a.add_argument("--frames", required=True, help="directory of frame_NNNN.csv files")
        a.add_argument("--taus", help="comma-separated averaging times in s")
        a.add_argument("--config", help="analysis YAML")
        a.add_argument("--exclude", action="append", metavar="LO:HI", help="idler band to drop, repeatable")
        a.add_argument("--no-exclude", action="store_true", help="keep the crystal-absorption region")
        a.add_argument("--scalarization", choices=("pixel", "band_mean"))
        a.add_argument("--brightness", type=float, help="flux factor for the extrapolated curve")
        a.add_argument("--brightness-out", help="CSV for the extrapolated curve")
        a.add_argument("--out", required=True, help="Allan CSV")
        a.add_argument("--plot", help="log-log SVG")
        a.set_defaults(func=cmd_allan)

    c = sub.add_parser("calibrate-opld", help="resolution and visibility against OPLD")
    c.add_argument("--config", help="scan YAML")
    c.add_argument("--oplds", help="comma-separated OPLDs in mm")
    c.add_argument("--noise", action="store_true", help="use shot-noise frames instead of noiseless ones")
    c.add_argument("--frames-per-point", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--out", required=True, help="scan CSV")
    c.add_argument("--plot", help="SVG")
    c.set_defaults(func=cmd_calibrate_opld)

    i = sub.add_parser("identify", help="match an absorbance spectrum against a polymer library")
    i.add_argument("--absorbance", help="absorbance CSV from retrieve")
    i.add_argument("--library", help="library YAML (default: built-in PS/PP/PE)")
    i.add_argument("--write-library", help="export the active library as YAML")
    i.add_argument("--config", help="identification YAML")
    i.add_argument("--threshold", type=float)
    i.add_argument("--min-snr", type=float)
    i.add_argument("--min-prominence", type=float)
    i.add_argument("--out", help="report JSON (default: stdout)")
    i.set_defaults(func=cmd_identify)

    o = sub.add_parser("optimize-crystal", help="SNR-optimal crystal length")
    o.add_argument("--alpha", type=float, required=True, help="idler absorption coefficient (cm^-1)")
    o.add_argument("--points", type=int, default=301)
    o.add_argument("--max-length-mm", type=float)
    o.add_argument("--out", help="curve CSV (default: stdout)")
    o.add_argument("--plot", help="SVG")
    o.set_defaults(func=cmd_optimize_crystal)

    f = sub.add_parser("flux", help="detected photon flux of one frame")
    f.add_argument("--frame", required=True)
    f.add_argument("--config", help="YAML with a 'calibration' section")
    f.add_argument("--integration-time", type=float)
    f.add_argument("--bandwidth-nm", type=float)
    f.add_argument("--out", help="report JSON (default: stdout)")
    f.set_defaults(func=cmd_flux)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="nlispec: %(message)s")
    try:
        return args.func(args)
    except (FitError, ReferenceInvalidError) as exc:
        code, msg = EXIT_NUMERIC, str(exc)
    except FormatError as exc:
        code, msg = EXIT_IO, str(exc)
    except ConfigurationError as exc:
        code, msg = EXIT_CONFIG, str(exc)
    except OSError as exc:
        code, msg = EXIT_IO, str(exc)
    sys.stderr.write(f"nlispec: error: {msg}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())

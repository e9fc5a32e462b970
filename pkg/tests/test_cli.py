import json
from pathlib import Path

import pytest

from nlispec.cli import main
from nlispec.io import read_absorbance_csv, read_allan_csv, read_curve_csv, read_interferogram_csv, read_scan_csv


def run(*argv):
    return main([str(a) for a in argv])


def snapshot(paths):
    return {str(p): Path(p).read_bytes() for p in paths}


@pytest.fixture(scope="module")
def frames(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run("simulate", "--out", root / "ref", "--frames", 12, "--seed", 3) == 0
    assert run("simulate", "--out", root / "ps", "--frames", 1, "--seed", 900, "--sample", "polymer:PS") == 0
    return root


def test_simulate_deterministic(frames):
    files = sorted((frames / "ref").glob("frame_*.csv")) + [frames / "ref" / "manifest.json"]
    assert len(files) == 13
    before = snapshot(files)
    assert run("simulate", "--out", frames / "ref", "--frames", 12, "--seed", 3) == 0
    assert snapshot(files) == before
    assert read_interferogram_csv(files[0]).config.rng_seed == 3


def test_retrieve_identify(frames, capsys):
    out = frames / "a.csv"
    args = ("retrieve", "--sample", frames / "ps" / "frame_0000.csv", "--reference", frames / "ref" / "frame_0000.csv",
            "--reference-burst", frames / "ref", "--out", out)
    assert run(*args) == 0
    before = snapshot([out, out.with_suffix(".json")])
    assert run(*args) == 0
    assert snapshot([out, out.with_suffix(".json")]) == before
    a = read_absorbance_csv(out)
    assert a.axis.size > 100
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["noise_source"] == "reference burst"

    capsys.readouterr()
    assert run("identify", "--absorbance", out) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["decision"] == "PS"
    assert {s["polymer"] for s in report["scores"]} == {"PE", "PP", "PS"}


def test_allan(frames):
    out = frames / "allan.csv"
    assert run("allan", "--frames", frames / "ref", "--out", out, "--brightness", 100,
               "--brightness-out", frames / "bright.csv") == 0
    before = snapshot([out, frames / "bright.csv"])
    assert run("snr-scan", "--frames", frames / "ref", "--out", out, "--brightness", 100,
               "--brightness-out", frames / "bright.csv") == 0
    curve = read_allan_csv(out)
    assert curve.taus[0] == pytest.approx(0.01) and curve.taus.size >= 3
    assert run("allan", "--frames", frames / "ref", "--out", out, "--brightness", 100,
               "--brightness-out", frames / "bright.csv") == 0
    assert snapshot([out, frames / "bright.csv"]) == before


def test_calibrate_opld(tmp_path):
    out = tmp_path / "scan.csv"
    assert run("calibrate-opld", "--oplds", "0.5,1.45", "--out", out) == 0
    first = out.read_bytes()
    assert run("calibrate-opld", "--oplds", "0.5,1.45", "--out", out) == 0
    assert out.read_bytes() == first
    rows = read_scan_csv(out)
    assert [r[0] for r in rows] == [0.5, 1.45]


def test_optimize_crystal(tmp_path, capsys):
    assert run("optimize-crystal", "--alpha", 0.78, "--points", 50) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "L_opt = 12.82 mm"
    out = tmp_path / "c.csv"
    assert run("optimize-crystal", "--alpha", 0.78, "--out", out) == 0
    first = out.read_bytes()
    assert run("optimize-crystal", "--alpha", 0.78, "--out", out) == 0
    assert out.read_bytes() == first
    mm, rel = read_curve_csv(out)
    assert mm.size == 301 and rel.max() <= 1.0


def test_flux(frames, capsys):
    capsys.readouterr()
    assert run("flux", "--frame", frames / "ref" / "frame_0000.csv") == 0
    report = json.loads(capsys.readouterr().out)
    flux = report["detected_photons_per_s"]
    assert flux == pytest.approx(3.6e7, rel=0.05)


def test_write_library(tmp_path):
    lib = tmp_path / "lib.yaml"
    assert run("identify", "--write-library", lib) == 0
    assert "PS" in lib.read_text()


def test_config_dir(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg"
    cfg.mkdir()
    (cfg / "simulate.yaml").write_text("frames: 3\nseed: 11\n")
    (cfg / "other.yaml").write_text("frames: 2\n")
    monkeypatch.setenv("NLISPEC_CONFIG_DIR", str(cfg))
    assert run("simulate", "--out", tmp_path / "a") == 0
    assert len(list((tmp_path / "a").glob("frame_*.csv"))) == 3
    assert run("simulate", "--config", "other.yaml", "--out", tmp_path / "b") == 0
    assert len(list((tmp_path / "b").glob("frame_*.csv"))) == 2


@pytest.mark.parametrize("argv, code", [
    (("simulate", "--out", "{t}/x", "--sample", "bogus"), 2),
    (("simulate", "--out", "{t}/x", "--config", "{t}/missing.yaml"), 3),
    (("allan", "--frames", "{t}/nowhere", "--out", "{t}/a.csv"), 3),
    (("optimize-crystal", "--alpha", "-1"), 2),
])
def test_exit_codes(tmp_path, argv, code):
    assert run(*[a.format(t=tmp_path) for a in argv]) == code


def test_unknown_config_key(tmp_path):
    (tmp_path / "c.yaml").write_text("frame: 3\n")
    assert run("simulate", "--out", tmp_path / "x", "--config", tmp_path / "c.yaml") == 2


def test_malformed_frame(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nonsense\n")
    assert run("flux", "--frame", bad) == 3


def test_yaml_exponent_without_dot(tmp_path):
    (tmp_path / "s.yaml").write_text("frames: 2\nsource: {total_detected_flux: 3.6e7}\n")
    assert run("simulate", "--out", tmp_path / "x", "--config", tmp_path / "s.yaml") == 0
    (tmp_path / "b.yaml").write_text("source: {total_detected_flux: lots}\n")
    assert run("simulate", "--out", tmp_path / "y", "--config", tmp_path / "b.yaml") == 2

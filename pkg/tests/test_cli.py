import json
import subprocess
import sys

import pytest

from irisrec import cli
from irisrec.errors import NumericalDivergence


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps({"train.max_epochs": 3, "train.hidden": [32, 16]}))
    assert cli.main(["synth", "--out", str(d / "data"), "--classes", "3", "--images-per-class", "5"]) == 0
    return d, cfg


def test_stage_chain(small):
    d, cfg = small
    data = str(d / "data")
    assert cli.main(["ingest", data, "--out", str(d / "ing")]) == 0
    assert json.loads((d / "ing" / "manifest.json").read_text())["class_count"] == 3
    assert cli.main(["segment", data, "--out", str(d / "seg")]) == 0
    assert (d / "seg" / "geometries.json").is_file()
    assert cli.main(["normalize", data, "--out", str(d / "norm")]) == 0
    assert cli.main(["extract", data, "--out", str(d / "ext")]) == 0
    feats = str(d / "ext" / "features.csv")
    assert cli.main(["reduce", "--features", feats, "--config", str(cfg), "--out", str(d / "red")]) == 0
    reduced = str(d / "red" / "reduced.csv")
    assert cli.main(["train", "--reduced", reduced, "--config", str(cfg), "--out", str(d / "tr")]) == 0
    assert cli.main(["eval", "--reduced", reduced, "--model", str(d / "tr" / "mlp.bundle"),
                     "--out", str(d / "ev")]) == 0
    assert "accuracy" in json.loads((d / "ev" / "metrics.json").read_text())
    assert cli.main(["analyze", "--features", feats, "--out", str(d / "an")]) == 0
    assert (d / "an" / "auc_ranking.csv").is_file()


def test_debug_images(small):
    d, _ = small
    assert cli.main(["segment", str(d / "data"), "--out", str(d / "dbg"), "--debug-images"]) == 0
    assert any((d / "dbg" / "debug").glob("*_4_segmentation.pgm"))


def test_exit_codes(small, tmp_path, monkeypatch):
    d, cfg = small
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no.such.key": 1}))
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert cli.main(["ingest", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == cli.EXIT_DATA
    (tmp_path / "junk.bundle").write_bytes(b"junk")
    reduced = tmp_path / "r.csv"
    reduced.write_text("subject_id,image_id,kpc1,split\nS1,a,0.5,2\n")
    assert cli.main(["eval", "--reduced", str(reduced), "--model", str(tmp_path / "junk.bundle"),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_DATA

    def diverge(*a, **k):
        raise NumericalDivergence(3)

    monkeypatch.setattr(cli.pl, "fit_classifier", diverge)
    assert cli.main(["run", str(d / "data"), "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_NUMERIC


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "irisrec", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "synth" in r.stdout

import json

import numpy as np
import pytest

from irisrec.errors import ConfigError, EmptyDataset
from irisrec.imaging import load_image, save_pgm
from irisrec.pipeline import (DEFAULTS, ingest, load_config, read_features_csv, run_pipeline,
                              write_features_csv)
from irisrec.synth import SyntheticEyeSpec, generate_synthetic, render_eye


def _tree(root, layout):
    for sub, n in layout.items():
        (root / sub).mkdir(parents=True)
        for i in range(n):
            save_pgm(root / sub / f"{sub}_{i}.pgm", np.full((4, 4), i, np.uint8))


def test_ingest_counts(tmp_path):
    _tree(tmp_path, {"S1": 2, "S2": 3})
    m = ingest(tmp_path)
    assert len(m.entries) == 5 and m.class_count == 2
    assert m.labels().tolist() == [0, 0, 1, 1, 1]


def test_ingest_empty_and_missing(tmp_path):
    with pytest.raises(EmptyDataset):
        ingest(tmp_path)
    with pytest.raises(EmptyDataset):
        ingest(tmp_path / "nope")


def test_ingest_skips_corrupt(tmp_path):
    _tree(tmp_path, {"A": 2})
    (tmp_path / "A" / "broken.pgm").write_bytes(b"P5\n9 9\n255\n")
    (tmp_path / "A" / "notes.txt").write_text("hello")
    with pytest.warns(UserWarning):
        m = ingest(tmp_path)
    assert len(m.entries) == 2
    assert sorted(p.name for p in m.unreadable) == ["broken.pgm", "notes.txt"]


def test_config_precedence(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"run.seed": 5, "train.max_epochs": 7}))
    cfg = load_config(p, {"run.seed": 9, "run.threads": None})
    assert cfg["run.seed"] == 9 and cfg["train.max_epochs"] == 7
    assert cfg["run.threads"] == DEFAULTS["run.threads"]


@pytest.mark.parametrize("bad", [{"no.such": 1}, {"edges.method": "laplace"},
                                 {"train.dropout": 1.5}, {"split.train": 0.9}])
def test_config_errors(tmp_path, bad):
    with pytest.raises(ConfigError):
        load_config(None, bad)


def test_config_unreadable(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.json")


def test_synth_counts_and_determinism(tmp_path):
    spec = SyntheticEyeSpec(classes=2, images_per_class=3)
    entries = generate_synthetic(spec, tmp_path / "a")
    generate_synthetic(spec, tmp_path / "b")
    truth = json.loads((tmp_path / "a" / "ground_truth.json").read_text())
    assert len(entries) == 6 and len(truth["images"]) == 6
    for _, p in entries:
        twin = tmp_path / "b" / p.relative_to(tmp_path / "a")
        assert p.read_bytes() == twin.read_bytes()
    img, t, _ = render_eye(spec, 1, 2)
    assert np.array_equal(load_image(tmp_path / "a" / "S002" / "S002_02.pgm"), img)
    assert t["pupil"][2] < t["iris"][2]


def test_feature_csv_roundtrip(tmp_path, rng):
    f = rng.standard_normal((3, 252)) * 1e5
    ids = [("S1", "a"), ("S1", "b"), ("S2", "c")]
    write_features_csv(tmp_path / "f.csv", ids, f)
    ids2, f2, names = read_features_csv(tmp_path / "f.csv")
    assert ids2 == ids and np.array_equal(f, f2) and len(names) == 252


def test_small_run_artifacts(tmp_path):
    cfg = load_config(None, {"synth.classes": 3, "synth.images_per_class": 5, "train.max_epochs": 3,
                             "train.hidden": [32, 16]})
    res = run_pipeline(cfg, tmp_path)
    for name in ("features.csv", "geometries.json", "kpca.bundle", "mlp.bundle", "history.csv",
                 "metrics.json", "run_manifest.json", "analysis/analysis_summary.json"):
        assert (tmp_path / name).is_file(), name
    assert res.features.shape == (15 - len(res.failures), 252)
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["total_support"] == len(res.split[2])
    # the reduction is fitted on training rows only
    assert res.kpca.train.shape[0] == len(res.split[0])


def test_pipeline_smoke_on_suite(pipeline_run):
    res, _ = pipeline_run
    header = (res.out / "features.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 254 and len(res.ids) <= 200
    assert res.metrics.total_support == 40
    assert (res.out / "metrics.json").is_file()

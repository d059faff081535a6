"""Dataset ingestion, configuration and the end-to-end run.

Configuration is a flat mapping of dotted keys (``DEFAULTS`` lists every key
with its default). A JSON config file overrides the defaults and explicit
overrides (the CLI flags) override the file.
"""
import csv
import json
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import write_reports
from .bundle import save_bundle
from .classify import MLP, TrainConfig, evaluate, stratified_split, train
from .errors import ConfigError, CorruptData, EmptyDataset, IrisError, UnsupportedFormat
from .features import FEATURE_NAMES, extract_features
from .imaging import as_gray, load_image, save_pgm
from .normalization import rubber_sheet
from .preprocess import PreprocessConfig, enhance_ssr, preprocess
from .reduce import KernelSpec, kpca_fit
from .segmentation import SegmentConfig, segment, smooth_rtv
from .synth import SyntheticEyeSpec, generate_synthetic

log = logging.getLogger("irisrec")

DEFAULTS = {
    "data.root": None,
    "preprocess.ssr_sigma": 30.0,
    "preprocess.reflection_quantile": 0.995,
    "preprocess.median_radius": 1,
    "edges.method": "directional",
    "edges.scales": 3,
    "edges.directions": 8,
    "edges.threshold": 0.15,
    "segment.lambda": 0.015,
    "segment.rtv_iters": 4,
    "segment.pupil_r": None,
    "segment.iris_r": None,
    "normalize.height": 64,
    "normalize.width": 360,
    "features.levels": 32,
    "features.distance": 1,
    "features.fft_mode": "magnitude",
    "reduce.components": 100,
    "reduce.kernel": "rbf",
    "reduce.gamma": None,
    "train.hidden": [1000, 400],
    "train.max_epochs": 100,
    "train.batch_size": 8,
    "train.learning_rate": 1e-4,
    "train.dropout": 0.2,
    "train.patience": 10,
    "split.train": 0.6,
    "split.val": 0.2,
    "split.test": 0.2,
    "synth.classes": 20,
    "synth.images_per_class": 10,
    "synth.size": 128,
    "run.seed": 0,
    "run.threads": 1,
    "run.debug_images": False,
}

IMAGE_SUFFIXES = {".pgm", ".png"}


def load_config(path=None, overrides=None):
    """Defaults <- JSON file <- overrides. Unknown keys raise ``ConfigError``."""
    cfg = dict(DEFAULTS)
    layers = []
    if path is not None:
        try:
            layers.append(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(layers[-1], dict):
            raise ConfigError("config file must hold a JSON object")
    layers.append({k: v for k, v in (overrides or {}).items() if v is not None})
    for layer in layers:
        unknown = sorted(set(layer) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(layer)
    _validate(cfg)
    return cfg


def _validate(cfg):
    try:
        preprocess_config(cfg)
        segment_config(cfg)
        train_config(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg["edges.method"] not in ("directional", "canny", "sobel"):
        raise ConfigError(f"unknown edge method {cfg['edges.method']!r}")
    if cfg["reduce.kernel"] not in ("rbf", "linear", "polynomial"):
        raise ConfigError(f"unknown kernel {cfg['reduce.kernel']!r}")
    if int(cfg["run.threads"]) < 1 or int(cfg["reduce.components"]) < 1:
        raise ConfigError("run.threads and reduce.components must be positive")


def preprocess_config(cfg):
    return PreprocessConfig(float(cfg["preprocess.ssr_sigma"]),
                            float(cfg["preprocess.reflection_quantile"]),
                            int(cfg["preprocess.median_radius"]))


def segment_config(cfg):
    def rng(v):
        return None if v is None else (float(v[0]), float(v[1]))

    return SegmentConfig(
        rtv_lambda=float(cfg["segment.lambda"]), rtv_iters=int(cfg["segment.rtv_iters"]),
        edge_method=cfg["edges.method"], edge_scales=int(cfg["edges.scales"]),
        edge_directions=int(cfg["edges.directions"]), edge_threshold=float(cfg["edges.threshold"]),
        pupil_r=rng(cfg["segment.pupil_r"]), iris_r=rng(cfg["segment.iris_r"]),
    )


def train_config(cfg):
    return TrainConfig(
        max_epochs=int(cfg["train.max_epochs"]), batch_size=int(cfg["train.batch_size"]),
        learning_rate=float(cfg["train.learning_rate"]), dropout=float(cfg["train.dropout"]),
        train_frac=float(cfg["split.train"]), val_frac=float(cfg["split.val"]),
        test_frac=float(cfg["split.test"]), seed=int(cfg["run.seed"]),
        early_stop_patience=int(cfg["train.patience"]),
    )


def synth_spec(cfg):
    return SyntheticEyeSpec(classes=int(cfg["synth.classes"]),
                            images_per_class=int(cfg["synth.images_per_class"]),
                            size=int(cfg["synth.size"]), seed=int(cfg["run.seed"]))


# ---------------------------------------------------------------------------
# ingestion


@dataclass
class DatasetManifest:
    entries: list                       # (subject_id, Path), sorted
    class_count: int
    unreadable: list = field(default_factory=list)
    note: str = "<root>/<subject_id>/<image files>"

    @property
    def subjects(self):
        return sorted({s for s, _ in self.entries})

    def labels(self):
        index = {s: i for i, s in enumerate(self.subjects)}
        return np.array([index[s] for s, _ in self.entries], dtype=np.int64)

    def to_dict(self, root=None):
        def rel(p):
            return str(Path(p).relative_to(root)) if root else str(p)
        return {"class_count": self.class_count, "note": self.note,
                "entries": [[s, rel(p)] for s, p in self.entries],
                "unreadable": [rel(p) for p in self.unreadable]}


def ingest(root):
    """Scan ``<root>/<subject>/<image>``; unreadable images are skipped and listed."""
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"{root} is not a directory")
    entries, bad = [], []
    for sub in sorted(p for p in root.iterdir() if p.is_dir() and not p.name.startswith(".")):
        for f in sorted(p for p in sub.iterdir() if p.is_file() and not p.name.startswith(".")):
            try:
                load_image(f)
            except (UnsupportedFormat, CorruptData, OSError) as exc:
                warnings.warn(f"skipping unreadable image {f}: {exc}", stacklevel=2)
                bad.append(f)
                continue
            entries.append((sub.name, f))
    if not entries:
        raise EmptyDataset(f"no readable images under {root}")
    return DatasetManifest(entries, len({s for s, _ in entries}), bad)


def image_id(path):
    return Path(path).stem


# ---------------------------------------------------------------------------
# per-image stages


def _debug_dump(debug_dir, name, img, pre, cfg, geo, rect):
    d = Path(debug_dir)
    d.mkdir(parents=True, exist_ok=True)
    save_pgm(d / f"{name}_0_input.pgm", img)
    save_pgm(d / f"{name}_1_ssr.pgm", as_gray(enhance_ssr(img, cfg["preprocess.ssr_sigma"])))
    save_pgm(d / f"{name}_2_preprocessed.pgm", pre)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = smooth_rtv(pre, cfg["segment.lambda"], iters=cfg["segment.rtv_iters"])
    save_pgm(d / f"{name}_3_structure.pgm", as_gray(s * 255.0 / max(s.max(), 1e-12)))
    if geo is not None:
        overlay = pre.copy()
        overlay[geo.eyelid_mask] = overlay[geo.eyelid_mask] // 3
        yy, xx = np.mgrid[:pre.shape[0], :pre.shape[1]]
        for c in (geo.pupil, geo.iris):
            overlay[np.abs(np.hypot(xx - c.cx, yy - c.cy) - c.r) < 0.5] = 255
        save_pgm(d / f"{name}_4_segmentation.pgm", overlay)
    if rect is not None:
        save_pgm(d / f"{name}_5_normalized.pgm", as_gray(rect.data))
        save_pgm(d / f"{name}_6_valid.pgm", rect.valid.astype(np.uint8) * 255)


def process_image(path, cfg, stop="features", debug_dir=None):
    """Run one image through preprocess -> segment -> rubber sheet -> features.

    ``stop`` ends early at ``"segment"`` or ``"normalize"``. Returns a dict
    with the stage outputs produced so far.
    """
    img = load_image(path)
    pre = preprocess(img, preprocess_config(cfg))
    out = {"geometry": None, "rect": None, "features": None}
    try:
        out["geometry"] = segment(pre, segment_config(cfg))
        if stop != "segment":
            out["rect"] = rubber_sheet(pre, out["geometry"], int(cfg["normalize.height"]),
                                       int(cfg["normalize.width"]))
        if stop == "features":
            out["features"] = extract_features(out["rect"], int(cfg["features.levels"]),
                                               int(cfg["features.distance"]),
                                               cfg["features.fft_mode"])
    finally:
        if debug_dir is not None:
            _debug_dump(debug_dir, image_id(path), img, pre, cfg, out["geometry"], out["rect"])
    return out


def _worker(args):
    path, cfg, stop, debug_dir = args
    try:
        return process_image(path, cfg, stop, debug_dir), None
    except IrisError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_stage(manifest, cfg, stop="features", debug_dir=None):
    """Apply ``process_image`` to every manifest entry, isolating failures.

    Returns ``(results, failures)``; ``results[i]`` is None for a failed
    image and ``failures`` lists ``{subject_id, image_id, error}`` records.
    """
    jobs = [(p, cfg, stop, debug_dir) for _, p in manifest.entries]
    threads = int(cfg["run.threads"])
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(_worker, jobs, chunksize=4))
    else:
        outs = [_worker(j) for j in jobs]
    results, failures = [], []
    for (sid, p), (res, err) in zip(manifest.entries, outs):
        results.append(res)
        if err is not None:
            log.warning("%s: %s", p, err)
            failures.append({"subject_id": sid, "image_id": image_id(p), "error": err})
    return results, failures


# ---------------------------------------------------------------------------
# persistence helpers


def write_features_csv(path, ids, features):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "image_id", *FEATURE_NAMES])
        for (sid, iid), row in zip(ids, features):
            w.writerow([sid, iid, *(repr(float(v)) for v in row)])


def read_features_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["subject_id", "image_id"]:
        raise CorruptData(f"{path} is not a feature table")
    ids = [(r[0], r[1]) for r in rows[1:]]
    feats = np.array([[float(v) for v in r[2:]] for r in rows[1:]], dtype=np.float64)
    return ids, feats.reshape(len(ids), len(rows[0]) - 2), rows[0][2:]


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_history(path, history):
    cols = ["epoch", "train_loss", "val_loss", "train_acc", "val_acc"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for h in history:
            w.writerow([h["epoch"]] + [repr(float(h[c])) for c in cols[1:]])


# ---------------------------------------------------------------------------
# learning stages


def fit_reduction(features, train_idx, cfg):
    kernel = KernelSpec(cfg["reduce.kernel"], cfg["reduce.gamma"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = kpca_fit(features[train_idx], int(cfg["reduce.components"]), kernel)
    for w in caught:
        log.warning("%s", w.message)
    return model


def fit_classifier(z, labels, tr, va, n_classes, cfg):
    tcfg = train_config(cfg)
    sizes = [z.shape[1], *[int(h) for h in cfg["train.hidden"]], n_classes]
    model = MLP(sizes, tcfg.dropout, seed=[tcfg.seed, 3])
    history = train(model, z[tr], labels[tr], tcfg, z[va], labels[va])
    return model, history


@dataclass
class RunResult:
    manifest: DatasetManifest
    ids: list
    features: np.ndarray
    labels: np.ndarray
    geometries: list          # IrisGeometry or None, aligned with manifest entries
    failures: list
    split: tuple
    kpca: object
    model: object
    history: list
    metrics: object
    out: Path


def run_pipeline(cfg, out):
    """Full run; writes every artifact under ``out`` and returns a ``RunResult``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    root = cfg["data.root"]
    if root is None:
        root = out / "data"
        generate_synthetic(synth_spec(cfg), root)
    manifest = ingest(root)
    timings["ingest"] = time.perf_counter() - t0

    t = time.perf_counter()
    debug_dir = out / "debug" if cfg["run.debug_images"] else None
    results, failures = run_stage(manifest, cfg, "features", debug_dir)
    timings["images"] = time.perf_counter() - t
    ok = [i for i, r in enumerate(results) if r is not None]
    ids = [(manifest.entries[i][0], image_id(manifest.entries[i][1])) for i in ok]
    feats = np.array([results[i]["features"] for i in ok]).reshape(len(ok), len(FEATURE_NAMES))
    subjects = sorted({s for s, _ in ids})
    if len(subjects) < 2:
        raise EmptyDataset(f"only {len(subjects)} class(es) survived feature extraction")
    index = {s: k for k, s in enumerate(subjects)}
    labels = np.array([index[s] for s, _ in ids], dtype=np.int64)
    write_features_csv(out / "features.csv", ids, feats)
    geos = [r["geometry"] if r is not None else None for r in results]
    write_json(out / "geometries.json", {
        image_id(p): (g.to_dict() if g is not None else None)
        for (_, p), g in zip(manifest.entries, geos)})

    t = time.perf_counter()
    tr, va, te = stratified_split(labels, train_config(cfg))
    kpca = fit_reduction(feats, tr, cfg)
    z = kpca.transform(feats)
    save_bundle(out / "kpca.bundle", kpca)
    model, history = fit_classifier(z, labels, tr, va, len(subjects), cfg)
    save_bundle(out / "mlp.bundle", model)
    write_history(out / "history.csv", history)
    metrics = evaluate(model, z[te], labels[te])
    timings["learning"] = time.perf_counter() - t

    write_json(out / "metrics.json", {
        **metrics.to_dict(),
        "class_names": subjects,
        "n_images": len(manifest.entries), "n_features_ok": len(ok),
        "split_sizes": [len(tr), len(va), len(te)],
        "kpca_components": int(kpca.n_components),
        "epochs_run": len(history),
        "best_val_loss": float(min(h["val_loss"] for h in history)) if history else None,
    })
    t = time.perf_counter()
    write_reports(out / "analysis", feats, labels, FEATURE_NAMES)
    timings["analysis"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0

    write_json(out / "run_manifest.json", {
        "version": __version__,
        "config": cfg,
        "seeds": {"run": int(cfg["run.seed"]), "split": [int(cfg["run.seed"]), 2],
                  "mlp_init": [int(cfg["run.seed"]), 3], "mlp_batches": [int(cfg["run.seed"]), 1]},
        "threads": int(cfg["run.threads"]),
        "cpu_count": os.cpu_count(),
        "data_root": str(root),
        "dataset": manifest.to_dict(root),
        "failures": failures,
        "timings_s": timings,
        "outputs": sorted(str(p.relative_to(out)) for p in out.rglob("*")
                          if p.is_file() and "data" not in p.relative_to(out).parts[:1]),
    })
    return RunResult(manifest, ids, feats, labels, geos, failures, (tr, va, te), kpca, model,
                     history, metrics, out)

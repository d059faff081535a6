"""Command-line entry point: ``irisrec <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .analysis import write_reports
from .bundle import load_bundle, save_bundle
from .classify import evaluate, stratified_split
from .errors import (ConfigError, CorruptBundle, DimensionMismatch, IrisError,
                     NumericalDivergence, VersionMismatch)
from .features import FEATURE_NAMES
from .imaging import as_gray, save_pgm
from .synth import generate_synthetic

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _common(p):
    p.add_argument("--config", type=Path, help="flat JSON config with dotted keys")
    p.add_argument("--seed", type=int, help="overrides run.seed")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--threads", type=int, help="worker processes for per-image stages")
    p.add_argument("--debug-images", action="store_true", help="write intermediate PGMs")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="irisrec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render the synthetic eye corpus")
    _common(p)
    p.add_argument("--classes", type=int)
    p.add_argument("--images-per-class", type=int)

    for name, desc in [("ingest", "list a dataset directory"),
                       ("segment", "segment every image"),
                       ("normalize", "unwrap every iris to a rectangle"),
                       ("extract", "write the 252-feature table")]:
        p = sub.add_parser(name, help=desc)
        _common(p)
        p.add_argument("root", type=Path, help="<root>/<subject>/<images>")

    p = sub.add_parser("reduce", help="fit kernel PCA on the training split")
    _common(p)
    p.add_argument("--features", type=Path, required=True)

    p = sub.add_parser("train", help="train the classifier on reduced features")
    _common(p)
    p.add_argument("--reduced", type=Path, required=True, help="reduced.csv from 'reduce'")

    p = sub.add_parser("eval", help="evaluate a trained model on the test split")
    _common(p)
    p.add_argument("--reduced", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)

    p = sub.add_parser("analyze", help="correlation and AUC reports")
    _common(p)
    p.add_argument("--features", type=Path, required=True)

    p = sub.add_parser("run", help="full pipeline (synthetic data when no root is given)")
    _common(p)
    p.add_argument("root", type=Path, nargs="?")
    return parser


def _config(args):
    over = {"run.seed": args.seed, "run.threads": args.threads}
    if args.debug_images:
        over["run.debug_images"] = True
    root = getattr(args, "root", None)
    if root is not None:
        over["data.root"] = str(root)
    if args.command == "synth":
        over["synth.classes"] = args.classes
        over["synth.images_per_class"] = args.images_per_class
    return pl.load_config(args.config, over)


def _labels(ids):
    subjects = sorted({s for s, _ in ids})
    index = {s: k for k, s in enumerate(subjects)}
    return np.array([index[s] for s, _ in ids], dtype=np.int64), subjects


def _read_reduced(path):
    ids, z, cols = pl.read_features_csv(path)
    # the last column holds the split tag (0 train, 1 val, 2 test)
    return ids, z[:, :-1], z[:, -1].astype(int)


def cmd_synth(args, cfg):
    entries = generate_synthetic(pl.synth_spec(cfg), args.out)
    print(f"wrote {len(entries)} images to {args.out}")


def cmd_ingest(args, cfg):
    m = pl.ingest(cfg["data.root"])
    pl.write_json(args.out / "manifest.json", m.to_dict(Path(cfg["data.root"])))
    print(f"{len(m.entries)} images, {m.class_count} subjects, {len(m.unreadable)} unreadable")


def _stage(args, cfg, stop):
    m = pl.ingest(cfg["data.root"])
    debug = args.out / "debug" if cfg["run.debug_images"] else None
    results, failures = pl.run_stage(m, cfg, stop, debug)
    return m, results, failures


def cmd_segment(args, cfg):
    m, results, failures = _stage(args, cfg, "segment")
    pl.write_json(args.out / "geometries.json", {
        pl.image_id(p): (r["geometry"].to_dict() if r else None)
        for (_, p), r in zip(m.entries, results)})
    pl.write_json(args.out / "failures.json", failures)
    print(f"segmented {len(m.entries) - len(failures)}/{len(m.entries)} images")


def cmd_normalize(args, cfg):
    m, results, failures = _stage(args, cfg, "normalize")
    d = args.out / "normalized"
    d.mkdir(parents=True, exist_ok=True)
    for (_, p), r in zip(m.entries, results):
        if r is not None:
            save_pgm(d / f"{pl.image_id(p)}.pgm", as_gray(r["rect"].data))
            save_pgm(d / f"{pl.image_id(p)}_valid.pgm", r["rect"].valid.astype(np.uint8) * 255)
    pl.write_json(args.out / "failures.json", failures)
    print(f"normalized {len(m.entries) - len(failures)}/{len(m.entries)} images")


def cmd_extract(args, cfg):
    m, results, failures = _stage(args, cfg, "features")
    ids = [(s, pl.image_id(p)) for (s, p), r in zip(m.entries, results) if r is not None]
    feats = np.array([r["features"] for r in results if r is not None])
    pl.write_features_csv(args.out / "features.csv", ids, feats.reshape(len(ids), len(FEATURE_NAMES)))
    pl.write_json(args.out / "failures.json", failures)
    print(f"extracted features for {len(ids)}/{len(m.entries)} images")


def cmd_reduce(args, cfg):
    ids, feats, _ = pl.read_features_csv(args.features)
    labels, _ = _labels(ids)
    tr, va, te = stratified_split(labels, pl.train_config(cfg))
    kpca = pl.fit_reduction(feats, tr, cfg)
    save_bundle(args.out / "kpca.bundle", kpca)
    z = kpca.transform(feats)
    tag = np.zeros(len(ids))
    tag[va], tag[te] = 1, 2
    names = [f"kpc{i + 1}" for i in range(z.shape[1])] + ["split"]
    with open(args.out / "reduced.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "image_id", *names])
        for (s, i), row, t in zip(ids, z, tag):
            w.writerow([s, i, *(repr(float(v)) for v in row), int(t)])
    print(f"kept {kpca.n_components} components")


def cmd_train(args, cfg):
    ids, z, tag = _read_reduced(args.reduced)
    labels, subjects = _labels(ids)
    tr, va = np.nonzero(tag == 0)[0], np.nonzero(tag == 1)[0]
    model, history = pl.fit_classifier(z, labels, tr, va, len(subjects), cfg)
    save_bundle(args.out / "mlp.bundle", model)
    pl.write_history(args.out / "history.csv", history)
    print(f"trained {len(history)} epochs, final val acc {history[-1]['val_acc']:.3f}")


def cmd_eval(args, cfg):
    ids, z, tag = _read_reduced(args.reduced)
    labels, subjects = _labels(ids)
    te = np.nonzero(tag == 2)[0]
    model = load_bundle(args.model)
    metrics = evaluate(model, z[te], labels[te])
    pl.write_json(args.out / "metrics.json", {**metrics.to_dict(), "class_names": subjects})
    print(f"test accuracy {metrics.accuracy:.4f}")


def cmd_analyze(args, cfg):
    ids, feats, names = pl.read_features_csv(args.features)
    labels, _ = _labels(ids)
    summary = write_reports(args.out, feats, labels, names)
    print(f"|r| < 0.5 for {summary['fraction_below_half']:.1%} of feature pairs")


def cmd_run(args, cfg):
    res = pl.run_pipeline(cfg, args.out)
    print(f"test accuracy {res.metrics.accuracy:.4f} "
          f"({len(res.failures)} image failures, {res.kpca.n_components} components)")


COMMANDS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "segment": cmd_segment,
    "normalize": cmd_normalize, "extract": cmd_extract, "reduce": cmd_reduce,
    "train": cmd_train, "eval": cmd_eval, "analyze": cmd_analyze, "run": cmd_run,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        cfg = _config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDivergence as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IrisError, OSError, CorruptBundle, VersionMismatch, DimensionMismatch) as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Feature-pool diagnostics: Pearson correlation structure and AUC ranking."""
import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateClass, TooFewSamples
from .features import FEATURE_LAYOUT, GROUPS

HIST_BIN_WIDTH = 0.05


@dataclass
class CorrelationReport:
    matrix: np.ndarray
    histogram: np.ndarray       # counts of |r| (upper triangle) per 0.05 bin over [0, 1]
    fraction_below_half: float
    constant_columns: list


def pearson_matrix(f):
    """Column-wise Pearson correlations.

    Zero-variance columns correlate 0 with everything else (they are listed
    in ``constant_columns``); the diagonal is always 1.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 3:
        raise TooFewSamples("need at least 3 samples")
    d = f - f.mean(axis=0)
    norm = np.sqrt(np.sum(d**2, axis=0))
    const = norm <= 1e-12 * np.maximum(1.0, np.abs(f).max(axis=0)) * np.sqrt(f.shape[0])
    z = np.where(const, 0.0, d / np.where(const, 1.0, norm))
    r = z.T @ z
    r = np.clip(0.5 * (r + r.T), -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    iu = np.triu_indices(r.shape[0], k=1)
    off = np.abs(r[iu])
    nbins = int(round(1.0 / HIST_BIN_WIDTH))
    hist = np.bincount(np.minimum((off / HIST_BIN_WIDTH).astype(int), nbins - 1), minlength=nbins)
    frac = float(np.mean(off < 0.5)) if off.size else 1.0
    return CorrelationReport(r, hist, frac, [int(i) for i in np.nonzero(const)[0]])


def mann_whitney_auc(pos, neg):
    """P(pos > neg) + 0.5 P(pos == neg) from average ranks."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise DegenerateClass("AUC needs both positives and negatives")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return u / (pos.size * neg.size)


def roc_auc_trapezoid(scores, is_pos):
    """Area under the empirical ROC curve by the trapezoid rule."""
    scores = np.asarray(scores, dtype=np.float64)
    is_pos = np.asarray(is_pos, dtype=bool)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], is_pos[order]
    # collapse tied scores into single ROC steps
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.r_[0, np.cumsum(y)[last]] / y.sum()
    fp = np.r_[0, np.cumsum(~y)[last]] / (~y).sum()
    return float(np.trapezoid(tp, fp))


def feature_auc(f, labels, index=None, fold=True):
    """Macro one-vs-rest AUC of one feature column.

    ``f`` is either the full matrix (with ``index``) or a single column.
    With ``fold`` each class AUC becomes ``max(A, 1 - A)``. Returns
    ``(mean, population std)`` over classes.
    """
    f = np.asarray(f, dtype=np.float64)
    col = f[:, index] if index is not None else f.ravel()
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise DegenerateClass("need at least two classes")
    aucs = []
    for c in classes:
        a = mann_whitney_auc(col[labels == c], col[labels != c])
        aucs.append(max(a, 1.0 - a) if fold else a)
    aucs = np.array(aucs)
    return float(aucs.mean()), float(aucs.std())


@dataclass
class AucReport:
    mean: np.ndarray
    std: np.ndarray
    folded: bool = True
    layout: tuple = FEATURE_LAYOUT


def auc_report(f, labels, fold=True, layout=FEATURE_LAYOUT):
    f = np.asarray(f, dtype=np.float64)
    stats = np.array([feature_auc(f, labels, j, fold) for j in range(f.shape[1])])
    return AucReport(stats[:, 0], stats[:, 1], fold, tuple(layout))


def rank_features(report):
    """Feature indices by descending mean AUC (ties by index) and per-group means."""
    order = np.lexsort((np.arange(report.mean.size), -report.mean))
    groups = {}
    for g in GROUPS:
        idx = [i for i, desc in enumerate(report.layout) if desc[0] == g]
        if idx:
            groups[g] = float(np.mean(report.mean[idx]))
    return [int(i) for i in order], groups


def write_reports(out_dir, features, labels, names):
    """Correlation and AUC reports as CSV plus a JSON summary; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corr = pearson_matrix(features)
    auc = auc_report(features, labels)
    order, groups = rank_features(auc)
    np.savetxt(out / "pearson_matrix.csv", corr.matrix, delimiter=",", fmt="%.17g")
    with open(out / "pearson_histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lo", "hi", "count"])
        for i, c in enumerate(corr.histogram):
            w.writerow([f"{i * HIST_BIN_WIDTH:.2f}", f"{(i + 1) * HIST_BIN_WIDTH:.2f}", int(c)])
    with open(out / "auc_ranking.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "index", "feature", "auc_mean", "auc_std"])
        for rank, j in enumerate(order, 1):
            w.writerow([rank, j, names[j], repr(float(auc.mean[j])), repr(float(auc.std[j]))])
    summary = {
        "fraction_below_half": corr.fraction_below_half,
        "constant_columns": corr.constant_columns,
        "top10": [{"feature": names[j], "auc_mean": float(auc.mean[j]), "auc_std": float(auc.std[j])}
                  for j in order[:10]],
        "group_means": groups,
        "auc_folded": auc.folded,
    }
    with open(out / "analysis_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary

"""Property-based checks of the numeric kernels."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from irisrec.analysis import feature_auc, mann_whitney_auc, pearson_matrix
from irisrec.classify import MLP, stratified_split
from irisrec.features import (compute_stats14, direction_offset, dwt2_haar, fft_magnitude, glcm, gldm,
                              idwt2_haar, quantize)
from irisrec.imaging import as_gray, histogram256, median_filter
from irisrec.preprocess import enhance_ssr, remove_reflections

import oracles

finite = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(1, 60), elements=finite)
gray = arrays(np.uint8, st.tuples(st.integers(3, 14), st.integers(3, 14)))
levels8 = arrays(np.int64, st.tuples(st.integers(2, 9), st.integers(2, 9)), elements=st.integers(0, 7))


@given(vectors)
def test_stats_invariants(v):
    s = dict(zip(("area", "mean", "std", "max", "min", "mdev", "energy", "entropy", "kurt", "skew",
                  "range", "rms", "median", "uni"), compute_stats14(v)))
    assert s["std"] >= 0 and s["energy"] >= 0 and s["rms"] >= 0 and s["entropy"] >= 0
    assert 0 < s["uni"] <= 1 + 1e-12
    assert s["range"] == s["max"] - s["min"] >= 0
    assert s["min"] <= s["median"] <= s["max"]
    assert s["min"] - 1e-9 * abs(s["min"]) <= s["mean"] <= s["max"] + 1e-9 * abs(s["max"])
    assert s["entropy"] <= 8 + 1e-12


@given(vectors)
def test_stats_match_oracle(v):
    got, want = compute_stats14(v), oracles.stats14(v)
    # errors are measured against each statistic's natural scale: values near
    # zero by cancellation cannot be matched relatively in float64
    big = max(np.max(np.abs(v)), 1e-300)
    natural = np.array([1, big, big, big, big, big, v.size * big**2, 1, 1, 1, big, big, big, 1])
    spread = np.ptp(v) / big
    cols = np.arange(14) if spread > 1e-6 else np.array([0, 1, 3, 4, 6, 10, 11, 12])
    tol = 1e-9 * np.maximum(np.abs(want), natural)
    assert np.all(np.abs(got - want)[cols] <= tol[cols])


@given(levels8, st.sampled_from([0, 45, 90, 135]), st.booleans())
@settings(deadline=None)
def test_texture_matrices_match_enumeration(q, d, periodic):
    dy, dx = direction_offset(d)
    if not oracles._pairs(q, dy, dx, periodic):
        return
    assert np.array_equal(glcm(q, None, d, 1, 8, periodic), oracles.glcm(q, dy, dx, 8, periodic))
    assert np.array_equal(gldm(q, None, d, 1, 8, periodic), oracles.gldm(q, dy, dx, 8, periodic))


@given(arrays(np.float64, st.tuples(st.integers(1, 6).map(lambda k: 4 * k),
                                    st.integers(1, 6).map(lambda k: 4 * k)),
              elements=st.floats(0, 255)))
def test_haar_roundtrip_and_parseval(x):
    assert np.max(np.abs(idwt2_haar(dwt2_haar(x)) - x), initial=0) <= 1e-9
    total = np.sum(x**2)
    if min(x.shape) >= 2:
        assert abs(np.sum(fft_magnitude(x) ** 2) / x.size - total) <= 1e-6 * max(total, 1.0)


@given(gray)
def test_median_is_order_statistic(img):
    out = median_filter(img)
    pad = np.pad(img, 1, mode="edge")
    y, x = img.shape[0] // 2, img.shape[1] // 2
    assert out[y, x] == np.sort(pad[y:y + 3, x:x + 3].ravel())[4]
    assert histogram256(out).sum() == img.size


@given(gray)
@settings(deadline=None)
def test_ssr_range_and_reflection_bounds(img):
    e = enhance_ssr(img, 3.0)
    assert e.min() >= 0 and e.max() <= 255 + 1e-9
    out = remove_reflections(img, 0.9)
    assert out.max() <= img.max() and out.dtype == np.uint8


@given(arrays(np.int64, st.integers(4, 30), elements=st.integers(-800, 800)),
       st.integers(0, 2**31 - 1))
def test_auc_invariance_and_symmetry(col, seed):
    col = col / 8.0     # spaced values keep the transform strictly increasing in floating point
    labels = np.random.default_rng(seed).integers(0, 3, col.size)
    if np.unique(labels).size < 2:
        return
    a = feature_auc(col, labels, fold=False)[0]
    assert feature_auc(np.arctan(col) * 7 + 3, labels, fold=False)[0] == a
    # negation mirrors every one-vs-rest AUC
    assert abs(feature_auc(-col, labels, fold=False)[0] - (1 - a)) < 1e-12
    pos, neg = col[labels == labels[0]], col[labels != labels[0]]
    assert abs(mann_whitney_auc(pos, neg) + mann_whitney_auc(neg, pos) - 1) < 1e-12


@given(arrays(np.float64, st.tuples(st.integers(3, 12), st.integers(2, 6)), elements=finite))
def test_pearson_contract(f):
    r = pearson_matrix(f).matrix
    assert np.array_equal(r, r.T) and np.all(np.diag(r) == 1)
    assert np.all(np.abs(r) <= 1)


@given(st.lists(st.integers(1, 12), min_size=1, max_size=6), st.integers(0, 1000))
def test_split_partitions_every_class(counts, seed):
    labels = np.repeat(np.arange(len(counts)), counts)
    tr, va, te = stratified_split(labels, seed=seed)
    allidx = np.concatenate([tr, va, te])
    assert np.array_equal(np.sort(allidx), np.arange(labels.size))
    assert set(labels[tr]) == set(labels)


@given(arrays(np.float64, (4, 5), elements=st.floats(-5, 5)), st.integers(0, 100))
def test_softmax_rows_are_distributions(x, seed):
    p = MLP([5, 7, 3], seed=seed).forward(x)
    assert np.all(p >= 0) and np.allclose(p.sum(axis=1), 1)


@given(arrays(np.float64, (5, 6), elements=st.floats(-300, 300)))
def test_quantize_and_gray_ranges(x):
    q = quantize(x, 32)
    assert q.min() >= 0 and q.max() <= 31
    g = as_gray(x)
    assert g.dtype == np.uint8

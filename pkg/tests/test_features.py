import numpy as np
import pytest

from irisrec.errors import EmptyInput, NoValidPairs
from irisrec.features import (FEATURE_LAYOUT, FEATURE_NAMES, STAT_NAMES, compute_stats14, dwt2_haar,
                              extract_features, fft_magnitude, glcm, gldm, group_indices, quantize)
from irisrec.normalization import NormalizedIris


def _stats(v):
    return dict(zip(STAT_NAMES, compute_stats14(np.asarray(v, float))))


def test_stats_constant_example():
    s = _stats([1, 1, 1, 1])
    assert s == {"area": 4, "mean": 1, "std": 0, "max": 1, "min": 1, "mean_deviation": 0,
                 "energy": 4, "entropy": 0, "kurtosis": 0, "skewness": 0, "range": 0,
                 "rms": 1, "median": 1, "uniformity": 1}


def test_stats_ramp_example():
    s = _stats([0, 1, 2, 3])
    assert s["mean"] == 1.5 and np.isclose(s["std"], np.sqrt(1.25))
    assert s["energy"] == 14 and np.isclose(s["rms"], np.sqrt(3.5))
    assert s["median"] == 1.5 and s["range"] == 3 and s["mean_deviation"] == 1.0 and s["area"] == 3


def test_stats_uniform_histogram():
    s = _stats(np.arange(256.0))
    assert np.isclose(s["entropy"], 8.0) and np.isclose(s["uniformity"], 1 / 256)


def test_stats_valid_mask_and_errors():
    v = np.array([5.0, 100.0, 7.0])
    assert np.array_equal(compute_stats14(v, [True, False, True]), compute_stats14([5.0, 7.0]))
    with pytest.raises(EmptyInput):
        compute_stats14(v, [False] * 3)
    with pytest.raises(ValueError):
        compute_stats14([1.0, np.inf])


def test_glcm_examples():
    q = np.array([[0, 0], [1, 1]])
    assert np.array_equal(glcm(q, direction=0, levels=2, periodic=False), [[0.5, 0], [0, 0.5]])
    c = glcm(np.full((5, 5), 3), levels=8)
    assert c[3, 3] == 1 and c.sum() == 1


def test_gldm_examples():
    q = np.array([[0, 0], [1, 1]])
    assert gldm(q, direction=90, levels=2)[1] == 1.0
    assert gldm(np.full((4, 4), 6), levels=8)[0] == 1.0


def test_texture_contracts(rng):
    q = rng.integers(0, 32, (16, 40))
    for d in (0, 45, 90, 135):
        c = glcm(q, direction=d)
        assert np.array_equal(c, c.T) and np.isclose(c.sum(), 1)
        assert np.isclose(gldm(q, direction=d).sum(), 1)


def test_texture_respects_valid_mask(rng):
    q = rng.integers(0, 4, (6, 6))
    valid = np.ones((6, 6), bool)
    valid[:, 3] = False
    want = np.zeros(4)
    for y in range(6):
        for x in range(6):
            if valid[y, x] and valid[y, (x + 1) % 6]:
                want[abs(q[y, x] - q[y, (x + 1) % 6])] += 1
    assert np.allclose(gldm(q, valid, 0, levels=4), want / want.sum())
    with pytest.raises(NoValidPairs):
        glcm(q, np.zeros((6, 6), bool))


def test_quantize_range():
    q = quantize(np.array([0.0, 7.99, 8.0, 255.0, 300.0]), 32)
    assert q.tolist() == [0, 0, 1, 31, 31]


def test_fft_constant_and_cosine():
    mag = fft_magnitude(np.full((8, 10), 3.0))
    assert np.isclose(mag[4, 5], 240) and np.isclose(np.delete(mag.ravel(), 4 * 10 + 5), 0).all()
    x = np.arange(16)
    img = np.tile(np.cos(2 * np.pi * 3 * x / 16), (6, 1))
    m = fft_magnitude(img)
    peaks = m > 1e-6 * m.max()
    assert peaks.sum() == 2 and peaks[3, 8 + 3] and peaks[3, 8 - 3]


def test_fft_matches_direct_dft(rng):
    f = rng.uniform(0, 1, (4, 6))
    h, w = f.shape
    ref = np.zeros((h, w), complex)
    for u in range(h):
        for v in range(w):
            for y in range(h):
                for x in range(w):
                    ref[u, v] += f[y, x] * np.exp(-2j * np.pi * (u * y / h + v * x / w))
    assert np.allclose(fft_magnitude(f), np.fft.fftshift(np.abs(ref)))


def test_haar_energy_matches_matrix_oracle(rng):
    x = rng.uniform(0, 255, (8, 8))
    s = 1 / np.sqrt(2)
    lo = np.kron(np.eye(4), [s, s])
    hi = np.kron(np.eye(4), [s, -s])
    bands = dwt2_haar(x, levels=1)
    assert np.allclose(bands["LL1"], lo @ x @ lo.T)
    assert np.allclose(bands["LH1"], hi @ x @ lo.T)
    assert np.allclose(bands["HL1"], lo @ x @ hi.T)
    assert np.allclose(bands["HH1"], hi @ x @ hi.T)
    energy = sum(np.sum(bands[k] ** 2) for k in ("LL1", "LH1", "HL1", "HH1"))
    assert abs(energy - np.sum(x**2)) <= 1e-9 * np.sum(x**2)


def test_layout_names():
    assert len(FEATURE_NAMES) == 252 and len(set(FEATURE_NAMES)) == 252
    assert FEATURE_NAMES[0] == "ShapeDensity_region_area"
    assert FEATURE_NAMES[-1] == "Wavelet_HH2_uniformity"
    assert [len(group_indices(g)) for g in ("ShapeDensity", "FFT", "GLCM", "GLDM", "Wavelet")] == [14, 14, 56, 56, 112]
    assert FEATURE_LAYOUT[14 * 2] == ("GLCM", "0", "area")


def test_constant_rect_shape_block():
    rect = NormalizedIris(np.full((64, 360), 42.0), np.ones((64, 360), bool))
    f = extract_features(rect)
    assert np.array_equal(f[:14], _const_block(42.0, 64 * 360))


def _const_block(c, n):
    return np.array([n, c, 0, c, c, 0, n * c * c, 0, 0, 0, 0, c, c, 1])


def test_gldm0_invariant_to_column_shift(rng):
    data = rng.uniform(0, 255, (64, 360))
    valid = np.ones_like(data, bool)
    a = extract_features(NormalizedIris(data, valid))
    b = extract_features(NormalizedIris(np.roll(data, 90, axis=1), valid))
    sel = [i for i, (g, s, _) in enumerate(FEATURE_LAYOUT) if g == "GLDM" and s == "0"]
    assert np.allclose(a[sel], b[sel], rtol=1e-6, atol=0)

"""The 252-value feature pool of a normalized iris.

Fourteen first-order statistics are applied to eighteen subsections: the
raw region, the FFT magnitude, four GLCMs, four GLDM histograms and the
eight sub-bands of a two-level Haar transform.
"""
import numpy as np

from .errors import EmptyInput, NoValidPairs

STAT_NAMES = (
    "area", "mean", "std", "max", "min", "mean_deviation", "energy", "entropy",
    "kurtosis", "skewness", "range", "rms", "median", "uniformity",
)
DIRECTIONS = (0, 45, 90, 135)
WAVELET_BANDS = ("LL1", "LH1", "HL1", "HH1", "LL2", "LH2", "HL2", "HH2")

SUBSECTIONS = (
    [("ShapeDensity", "region"), ("FFT", "magnitude")]
    + [("GLCM", str(d)) for d in DIRECTIONS]
    + [("GLDM", str(d)) for d in DIRECTIONS]
    + [("Wavelet", b) for b in WAVELET_BANDS]
)
FEATURE_LAYOUT = tuple((g, s, stat) for g, s in SUBSECTIONS for stat in STAT_NAMES)
FEATURE_NAMES = tuple(f"{g}_{s}_{stat}" for g, s, stat in FEATURE_LAYOUT)
N_FEATURES = len(FEATURE_LAYOUT)
GROUPS = ("ShapeDensity", "FFT", "GLCM", "GLDM", "Wavelet")


def group_indices(group):
    return [i for i, (g, _, _) in enumerate(FEATURE_LAYOUT) if g == group]


# ---------------------------------------------------------------------------
# statistics


def _hist256(x, lo, hi):
    bins = np.floor((x - lo) * (255.0 / (hi - lo)) + 0.5).astype(np.int64)
    counts = np.bincount(np.clip(bins, 0, 255), minlength=256)
    return counts / x.size


def compute_stats14(values, valid=None):
    """Fourteen statistics over the valid entries of ``values``, in ``STAT_NAMES`` order.

    Moments are population moments; kurtosis is the raw ``m4 / m2**2``.
    Entropy (bits) and uniformity use a 256-bin histogram of the values
    min-max scaled to [0, 255]. A zero second moment (constant input) gives
    kurtosis = skewness = entropy = 0 and uniformity = 1.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if valid is not None:
        x = x[np.asarray(valid, dtype=bool).ravel()]
    if x.size == 0:
        raise EmptyInput("no valid values")
    if not np.all(np.isfinite(x)):
        raise ValueError("statistics input contains NaN or Inf")
    n = x.size
    lo, hi = x.min(), x.max()
    # a constant input has exactly zero spread; avoid round-off in the mean
    mean = hi if hi == lo else x.mean()
    d = x - mean
    m2 = np.mean(d**2)
    energy = np.sum(x**2)
    if hi == lo or m2 == 0:     # m2 can underflow for tiny spreads
        kurt = skew = entropy = 0.0
        uniformity = 1.0
    else:
        # standardized moments are scale free; normalizing first avoids underflow
        u = d / np.abs(d).max()
        u2 = np.mean(u**2)
        kurt = np.mean(u**4) / u2**2
        skew = np.mean(u**3) / u2**1.5
        p = _hist256(x, lo, hi)
        nz = p[p > 0]
        entropy = float(-np.sum(nz * np.log2(nz)))
        uniformity = float(np.sum(p**2))
    return np.array([
        np.count_nonzero(x), mean, np.sqrt(m2), hi, lo, np.mean(np.abs(d)), energy,
        entropy, kurt, skew, hi - lo, np.sqrt(energy / n), np.median(x), uniformity,
    ])


# ---------------------------------------------------------------------------
# texture matrices


def quantize(plane, levels=32, vmax=256.0):
    """Map intensities in ``[0, vmax)`` to integer levels ``0..levels-1``."""
    q = np.floor(np.asarray(plane, dtype=np.float64) * (levels / vmax)).astype(np.int64)
    return np.clip(q, 0, levels - 1)


def direction_offset(direction, distance=1):
    """(dy, dx) displacement for 0/45/90/135 degrees (image rows grow downward)."""
    offsets = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
    if direction not in offsets:
        raise ValueError(f"direction must be one of {sorted(offsets)}")
    dy, dx = offsets[direction]
    return dy * distance, dx * distance


def _pairs(q, valid, direction, distance, periodic):
    """Gray-level pairs (a, b) at the given displacement, both ends valid.

    With ``periodic`` the column axis wraps around, matching the angular
    axis of a rubber-sheet rectangle; rows never wrap.
    """
    q = np.asarray(q)
    h, w = q.shape
    valid = np.ones((h, w), bool) if valid is None else np.asarray(valid, bool)
    dy, dx = direction_offset(direction, distance)
    ys = np.arange(max(0, -dy), min(h, h - dy))
    if periodic:
        xs = np.arange(w)
    else:
        xs = np.arange(max(0, -dx), min(w, w - dx))
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    y2, x2 = yy + dy, (xx + dx) % w
    ok = valid[yy, xx] & valid[y2, x2]
    return q[yy, xx][ok], q[y2, x2][ok]


def glcm(q, valid=None, direction=0, distance=1, levels=32, periodic=True):
    """Symmetric, unit-mass co-occurrence matrix of a quantized plane."""
    a, b = _pairs(q, valid, direction, distance, periodic)
    if a.size == 0:
        raise NoValidPairs(f"no valid pixel pairs at {direction} degrees")
    counts = np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels)
    counts = counts + counts.T
    return counts / counts.sum()


def gldm(q, valid=None, direction=0, distance=1, levels=32, periodic=True):
    """Probability of each absolute gray-level difference ``0..levels-1``."""
    a, b = _pairs(q, valid, direction, distance, periodic)
    if a.size == 0:
        raise NoValidPairs(f"no valid pixel pairs at {direction} degrees")
    counts = np.bincount(np.abs(a - b), minlength=levels)
    return counts / counts.sum()


# ---------------------------------------------------------------------------
# transforms


def _mean_filled(data, valid):
    data = np.asarray(data, dtype=np.float64)
    if valid is None:
        return data
    valid = np.asarray(valid, bool)
    if not valid.any():
        raise EmptyInput("no valid pixels")
    return np.where(valid, data, data[valid].mean())


def fft_magnitude(data, valid=None):
    """DC-centred 2-D DFT magnitude; invalid cells are filled with the valid mean first."""
    f = _mean_filled(data, valid)
    if min(f.shape) < 2:
        raise ValueError("need at least 2x2 samples")
    return np.abs(np.fft.fftshift(np.fft.fft2(f)))


_S = 1.0 / np.sqrt(2.0)


def _haar_step(x):
    """One orthonormal 2-D Haar level. Band names: first letter horizontal filter."""
    lo = (x[:, 0::2] + x[:, 1::2]) * _S
    hi = (x[:, 0::2] - x[:, 1::2]) * _S
    ll = (lo[0::2] + lo[1::2]) * _S
    lh = (lo[0::2] - lo[1::2]) * _S
    hl = (hi[0::2] + hi[1::2]) * _S
    hh = (hi[0::2] - hi[1::2]) * _S
    return ll, lh, hl, hh


def _haar_inverse_step(ll, lh, hl, hh):
    lo = np.empty((ll.shape[0] * 2, ll.shape[1]))
    hi = np.empty_like(lo)
    lo[0::2], lo[1::2] = (ll + lh) * _S, (ll - lh) * _S
    hi[0::2], hi[1::2] = (hl + hh) * _S, (hl - hh) * _S
    x = np.empty((lo.shape[0], lo.shape[1] * 2))
    x[:, 0::2], x[:, 1::2] = (lo + hi) * _S, (lo - hi) * _S
    return x


def dwt2_haar(data, valid=None, levels=2):
    """Orthonormal Haar analysis keeping all four bands of every level.

    Returns a dict ``{"LL1", "LH1", "HL1", "HH1", "LL2", ...}``; level k+1
    splits ``LLk``. Sizes not divisible by ``2**levels`` are edge-padded.
    """
    x = _mean_filled(data, valid)
    m = 2**levels
    ph, pw = (-x.shape[0]) % m, (-x.shape[1]) % m
    if ph or pw:
        x = np.pad(x, ((0, ph), (0, pw)), mode="edge")
    bands = {}
    for k in range(1, levels + 1):
        ll, lh, hl, hh = _haar_step(x)
        bands.update({f"LL{k}": ll, f"LH{k}": lh, f"HL{k}": hl, f"HH{k}": hh})
        x = ll
    return bands


def idwt2_haar(bands, levels=2):
    """Inverse of ``dwt2_haar`` (ignores the redundant ``LL`` of inner levels)."""
    x = bands[f"LL{levels}"]
    for k in range(levels, 0, -1):
        x = _haar_inverse_step(x, bands[f"LH{k}"], bands[f"HL{k}"], bands[f"HH{k}"])
    return x


# ---------------------------------------------------------------------------


def _fft_values(mag, mode):
    if mode == "magnitude":
        return mag
    if mode == "log":
        return np.log1p(mag)
    if mode == "power":
        return mag**2
    raise ValueError(f"unknown fft mode {mode!r}")


def extract_features(rect, levels=32, distance=1, fft_mode="magnitude"):
    """252 features of a ``NormalizedIris`` in ``FEATURE_LAYOUT`` order."""
    data, valid = rect.data, rect.valid
    blocks = [compute_stats14(data, valid)]
    blocks.append(compute_stats14(_fft_values(fft_magnitude(data, valid), fft_mode)))
    q = quantize(data, levels)
    for d in DIRECTIONS:
        blocks.append(compute_stats14(glcm(q, valid, d, distance, levels)))
    for d in DIRECTIONS:
        blocks.append(compute_stats14(gldm(q, valid, d, distance, levels)))
    bands = dwt2_haar(data, valid)
    for b in WAVELET_BANDS:
        blocks.append(compute_stats14(bands[b]))
    out = np.concatenate(blocks)
    if out.size != N_FEATURES or not np.all(np.isfinite(out)):
        raise ValueError("feature extraction produced a malformed vector")
    return out

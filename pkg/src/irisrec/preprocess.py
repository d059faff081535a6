"""Illumination normalization, impulse-noise removal and specular suppression."""
from dataclasses import dataclass

import numpy as np

from .imaging import as_gray, gaussian_blur, histogram256, median_filter


@dataclass(frozen=True)
class PreprocessConfig:
    ssr_sigma: float = 30.0
    reflection_quantile: float = 0.995
    median_radius: int = 1

    def __post_init__(self):
        if not self.ssr_sigma > 0:
            raise ValueError("ssr_sigma must be positive")
        if not 0 < self.reflection_quantile <= 1:
            raise ValueError("reflection_quantile must lie in (0, 1]")
        if self.median_radius < 1:
            raise ValueError("median_radius must be >= 1")


def retinex_response(img, sigma):
    """Single-scale retinex map ``log(I+1) - log(G*I + 1)`` before any rescale."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    f = np.asarray(img, dtype=np.float64)
    return np.log(f + 1.0) - np.log(gaussian_blur(f, sigma) + 1.0)


def enhance_ssr(img, sigma=30.0):
    """Single-scale retinex, min-max rescaled to [0, 255].

    A flat response (constant input) maps to an all-zero image.
    """
    r = retinex_response(img, sigma)
    lo, hi = r.min(), r.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.zeros_like(r)
    return (r - lo) * (255.0 / (hi - lo))


def reflection_threshold(img, quantile):
    """Smallest intensity T with at least ``quantile`` of the pixels <= T."""
    hist = histogram256(img)
    cdf = np.cumsum(hist) / hist.sum()
    # tolerate round-off in the cumulative fraction
    return int(np.argmax(cdf >= quantile - 1e-12))


def remove_reflections(img, quantile=0.995, window=7):
    """Replace pixels brighter than the quantile threshold by a local median.

    Each exceeding pixel takes the median of the non-exceeding pixels in its
    ``window x window`` neighborhood (clipped at the border), or the global
    median of non-exceeding pixels when the neighborhood has none.
    """
    if not 0 < quantile <= 1:
        raise ValueError("quantile must lie in (0, 1]")
    img = as_gray(img)
    t = reflection_threshold(img, quantile)
    bright = img > t
    if not bright.any():
        return img.copy()
    out = img.copy()
    h, w = img.shape
    half = window // 2
    keep = img[~bright]
    global_med = np.median(keep)
    for y, x in zip(*np.nonzero(bright)):
        y0, y1 = max(0, y - half), min(h, y + half + 1)
        x0, x1 = max(0, x - half), min(w, x + half + 1)
        patch = img[y0:y1, x0:x1]
        vals = patch[~bright[y0:y1, x0:x1]]
        med = np.median(vals) if vals.size else global_med
        out[y, x] = int(np.floor(med + 0.5))
    return out


def preprocess(img, cfg=None):
    """SSR enhancement -> 8-bit quantization -> median filter -> reflection removal."""
    cfg = cfg or PreprocessConfig()
    enhanced = as_gray(enhance_ssr(img, cfg.ssr_sigma))
    denoised = median_filter(enhanced, cfg.median_radius)
    return remove_reflections(denoised, cfg.reflection_quantile)

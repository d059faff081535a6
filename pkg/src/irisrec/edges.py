"""Edge detection: a multi-scale oriented filter bank plus Canny and Sobel baselines.

The directional detector approximates a shearlet edge detector with
anisotropic first-derivative-of-Gaussian kernels (2:1 elongation along the
edge, dyadic scales, evenly spaced orientations). Every kernel is zero-mean
and normalized so an ideal unit step along its normal responds with 1, so
responses are comparable across scales and carry image contrast units.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft, ndimage

from .errors import ImageTooSmall
from .imaging import as_float


@dataclass
class EdgeMap:
    magnitude: np.ndarray    # >= 0
    orientation: np.ndarray  # edge-normal angle in [0, pi)
    binary: np.ndarray       # bool
    threshold: float         # absolute magnitude threshold applied

    @property
    def shape(self):
        return self.magnitude.shape

    def points(self):
        """(y, x) coordinates of edge pixels."""
        return np.nonzero(self.binary)

    def subpixel_points(self):
        """Edge pixel coordinates refined by a parabola through the magnitude
        profile along the quantized normal (shift clipped to half a step)."""
        ys, xs = self.points()
        m = np.pad(self.magnitude, 1, mode="edge")
        dy, dx = _normal_steps(self.orientation[ys, xs])
        c = m[ys + 1, xs + 1]
        f = m[ys + 1 + dy, xs + 1 + dx]
        b = m[ys + 1 - dy, xs + 1 - dx]
        curv = b - 2.0 * c + f
        t = np.where(curv < 0, 0.5 * (b - f) / np.where(curv < 0, curv, -1.0), 0.0)
        t = np.clip(t, -0.5, 0.5)
        return ys + t * dy, xs + t * dx


def _flat_floor(img):
    # magnitudes below this are round-off from zero-mean kernels
    return 1e-9 * max(1.0, float(np.abs(img).max()))


@lru_cache(maxsize=32)
def oriented_kernel(sigma, theta, elongation=2.0):
    """Derivative of an anisotropic Gaussian taken along the normal ``theta``."""
    s_n = sigma
    s_t = elongation * sigma
    radius = int(np.ceil(3.0 * s_t))
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1].astype(np.float64)
    u = xx * np.cos(theta) + yy * np.sin(theta)
    v = -xx * np.sin(theta) + yy * np.cos(theta)
    k = -u / s_n**2 * np.exp(-0.5 * (u / s_n) ** 2 - 0.5 * (v / s_t) ** 2)
    k -= k.mean()
    k /= np.abs(k[u > 0]).sum()
    k.setflags(write=False)
    return k


def filter_bank(scales=3, directions=8, base_sigma=1.0, elongation=2.0):
    """Kernels indexed ``[direction][scale]`` with dyadic scale steps."""
    thetas = np.pi * np.arange(directions) / directions
    sigmas = base_sigma * 2.0 ** np.arange(scales)
    return thetas, [[oriented_kernel(float(s), float(t), elongation) for s in sigmas] for t in thetas]


def _correlate_many(img, kernels):
    """Correlate ``img`` (edge-replicated) with each kernel via one padded FFT."""
    radius = max(k.shape[0] // 2 for k in kernels)
    h, w = img.shape
    padded = np.pad(img, radius, mode="edge")
    shape = padded.shape
    spec = fft.rfft2(padded)
    out = []
    for k in kernels:
        r = k.shape[0] // 2
        # flipped kernel, centered at the origin with circular wrap
        kk = np.zeros(shape)
        flipped = k[::-1, ::-1]
        kk[: r + 1, : r + 1] = flipped[r:, r:]
        kk[: r + 1, -r:] = flipped[r:, :r]
        kk[-r:, : r + 1] = flipped[:r, r:]
        kk[-r:, -r:] = flipped[:r, :r]
        resp = fft.irfft2(spec * fft.rfft2(kk), s=shape)
        out.append(resp[radius:radius + h, radius:radius + w])
    return out


# (dy, dx) of the forward neighbour for normals 0, 45, 90, 135 degrees
_STEPS = np.array([(0, 1), (1, 1), (1, 0), (1, -1)])


def _orientation_bins(orientation):
    return np.floor((orientation + np.pi / 8) / (np.pi / 4)).astype(int) % 4


def _normal_steps(orientation):
    st = _STEPS[_orientation_bins(orientation)]
    return st[..., 0], st[..., 1]


def non_max_suppression(magnitude, orientation):
    """Keep pixels that dominate their two neighbours along the quantized normal.

    Ties keep the pixel on the negative side, so a symmetric ridge stays 1 px wide.
    """
    h, w = magnitude.shape
    m = np.pad(magnitude, 1, mode="edge")
    bins = _orientation_bins(orientation)
    keep = np.zeros((h, w), dtype=bool)
    centre = m[1:h + 1, 1:w + 1]
    for b, (dy, dx) in enumerate(_STEPS):
        fwd = m[1 + dy:h + 1 + dy, 1 + dx:w + 1 + dx]
        bwd = m[1 - dy:h + 1 - dy, 1 - dx:w + 1 - dx]
        keep |= (bins == b) & (centre > bwd) & (centre >= fwd)
    return keep


def detect_edges_directional(img, scales=3, directions=8, threshold=0.15, base_sigma=1.0):
    """Multi-scale directional edge map.

    Magnitude is the largest absolute response over the bank, orientation
    the argmax direction (ties to the lowest index); binary edges are
    non-maximum suppressed and thresholded at ``threshold * max magnitude``.
    """
    if scales < 1 or directions < 4:
        raise ValueError("need scales >= 1 and directions >= 4")
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    img = as_float(img)
    thetas, bank = filter_bank(scales, directions, base_sigma)
    support = bank[0][-1].shape[0]
    if min(img.shape) < support:
        raise ImageTooSmall(f"image {img.shape} smaller than kernel support {support}")
    flat = [k for per_dir in bank for k in per_dir]
    responses = np.abs(np.array(_correlate_many(img, flat)))
    per_dir = responses.reshape(directions, scales, *img.shape).max(axis=1)
    magnitude = per_dir.max(axis=0)
    orientation = thetas[np.argmax(per_dir, axis=0)]
    return _finish(img, magnitude, orientation, threshold)


def _finish(img, magnitude, orientation, threshold, nms=True):
    magnitude = np.where(magnitude < _flat_floor(img), 0.0, magnitude)
    peak = magnitude.max()
    if peak == 0:
        return EdgeMap(magnitude, orientation, np.zeros(magnitude.shape, bool), 0.0)
    t = threshold * peak
    binary = magnitude >= t
    if nms:
        binary &= non_max_suppression(magnitude, orientation)
    return EdgeMap(magnitude, orientation, binary, float(t))


def _sobel(img):
    gx = ndimage.sobel(img, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(img, axis=0, mode="nearest") / 8.0
    return np.hypot(gx, gy), np.mod(np.arctan2(gy, gx), np.pi)


def detect_edges_canny(img, low=0.1, high=0.2, sigma=1.4):
    """Canny: Gaussian smoothing, Sobel gradients, NMS and hysteresis.

    ``low`` and ``high`` are fractions of the maximum gradient magnitude.
    """
    if not 0 < low < high < 1:
        raise ValueError("need 0 < low < high < 1")
    img = as_float(img)
    if min(img.shape) < 3:
        raise ImageTooSmall("Canny needs at least 3x3 pixels")
    smooth = ndimage.gaussian_filter(img, sigma, mode="nearest")
    magnitude, orientation = _sobel(smooth)
    magnitude = np.where(magnitude < _flat_floor(img), 0.0, magnitude)
    peak = magnitude.max()
    if peak == 0:
        return EdgeMap(magnitude, orientation, np.zeros(img.shape, bool), 0.0)
    thin = non_max_suppression(magnitude, orientation)
    weak = thin & (magnitude >= low * peak)
    strong = thin & (magnitude >= high * peak)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3)))
    good = np.zeros(n + 1, dtype=bool)
    good[np.unique(labels[strong])] = True
    good[0] = False
    return EdgeMap(magnitude, orientation, good[labels], float(low * peak))


def detect_edges_sobel(img, threshold=0.2):
    """3x3 Sobel magnitude thresholded at ``threshold * max`` (no thinning)."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    img = as_float(img)
    if min(img.shape) < 3:
        raise ImageTooSmall("Sobel needs at least 3x3 pixels")
    magnitude, orientation = _sobel(img)
    return _finish(img, magnitude, orientation, threshold, nms=False)


def detect_edges(img, method="directional", **kwargs):
    if method == "directional":
        return detect_edges_directional(img, **kwargs)
    if method == "canny":
        return detect_edges_canny(img, **kwargs)
    if method == "sobel":
        return detect_edges_sobel(img, **kwargs)
    raise ValueError(f"unknown edge method {method!r}")

"""Rubber-sheet unwrapping of the iris annulus into a fixed-size rectangle."""
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientCoverage

MIN_COVERAGE = 0.4


@dataclass
class NormalizedIris:
    """Polar rectangle: rows run pupil -> limbus, columns run over 360 degrees."""

    data: np.ndarray    # float64, (height, width)
    valid: np.ndarray   # bool, same shape

    def __post_init__(self):
        if self.data.shape != self.valid.shape:
            raise ValueError("data and valid planes must share dimensions")

    @property
    def shape(self):
        return self.data.shape

    @property
    def coverage(self):
        return float(self.valid.mean())


def sample_points(geo, height=64, width=360):
    """Cartesian sample coordinates ``(x, y)`` of every rectangle cell."""
    r = np.linspace(0.0, 1.0, height)[:, None]
    theta = 2 * np.pi * np.arange(width)[None, :] / width
    c, s = np.cos(theta), np.sin(theta)
    p, q = geo.pupil, geo.iris
    px, py = p.cx + p.r * c, p.cy + p.r * s
    qx, qy = q.cx + q.r * c, q.cy + q.r * s
    return (1 - r) * px + r * qx, (1 - r) * py + r * qy


def bilinear(img, x, y):
    """Bilinear lookup with coordinates clamped to the image; also returns in-bounds flags."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xc = np.clip(x, 0, w - 1)
    yc = np.clip(y, 0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(int), max(w - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(int), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bottom * fy, inside


def rubber_sheet(img, geo, height=64, width=360, min_coverage=MIN_COVERAGE):
    """Map the annulus between the pupil and iris circles onto ``height x width``.

    Row ``i`` sits at radial fraction ``i / (height - 1)`` on the straight
    segment joining the pupil and iris boundaries at angle
    ``2 pi j / width``. Cells outside the image or inside the eyelid mask
    are marked invalid; ``InsufficientCoverage`` is raised below
    ``min_coverage`` valid fraction.
    """
    if height < 2 or width < 4:
        raise ValueError("need height >= 2 and width >= 4")
    x, y = sample_points(geo, height, width)
    data, inside = bilinear(img, x, y)
    mask = np.asarray(geo.eyelid_mask, dtype=bool)
    h, w = mask.shape
    yi = np.clip(np.floor(y + 0.5).astype(int), 0, h - 1)
    xi = np.clip(np.floor(x + 0.5).astype(int), 0, w - 1)
    valid = inside & ~mask[yi, xi]
    rect = NormalizedIris(data, valid)
    if rect.coverage < min_coverage:
        raise InsufficientCoverage(f"only {rect.coverage:.1%} of the rectangle is valid")
    return rect

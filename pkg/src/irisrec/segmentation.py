"""Pupil/iris localization and eyelid masking.

Flow: relative-total-variation smoothing removes iris texture while keeping
the pupil and limbus boundaries, the directional edge detector runs on the
structure layer, a dark-region seed plus two constrained circular Hough
searches find the pupil and iris, and parabolas fitted to near-horizontal
edges inside the iris give the eyelid mask.
"""
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import spsolve

from .edges import EdgeMap, detect_edges
from .errors import NoIrisFound, NoPupilFound, NonConvergenceWarning
from .imaging import as_float, as_gray


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("circle radius must be positive")

    def distance_to(self, other):
        return float(np.hypot(self.cx - other.cx, self.cy - other.cy))

    def as_tuple(self):
        return (self.cx, self.cy, self.r)


@dataclass
class IrisGeometry:
    pupil: Circle
    iris: Circle
    eyelid_mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.pupil.r < self.iris.r:
            raise ValueError("pupil radius must be smaller than iris radius")
        if not self.pupil.distance_to(self.iris) < self.iris.r - self.pupil.r:
            raise ValueError("pupil circle must lie strictly inside the iris circle")

    @property
    def source_dims(self):
        return self.eyelid_mask.shape

    def to_dict(self):
        return {
            "pupil": list(self.pupil.as_tuple()),
            "iris": list(self.iris.as_tuple()),
            "occluded_pixels": int(self.eyelid_mask.sum()),
        }


@dataclass(frozen=True)
class SegmentConfig:
    rtv_lambda: float = 0.015
    rtv_sigma: float = 3.0
    rtv_iters: int = 4
    edge_method: str = "directional"
    edge_scales: int = 3
    edge_directions: int = 8
    edge_threshold: float = 0.15
    pupil_r: tuple = None   # (min, max) px; default [10, 0.15 * min(w, h)]
    iris_r: tuple = None    # default [0.2, 0.45] * min(w, h)
    iris_center_tol: float = 15.0
    orientation_tol: float = np.pi / 6
    refine: bool = True     # fine-scale sub-pixel circle refinement


# ---------------------------------------------------------------------------
# relative total variation

_RTV_EPS = 1e-3      # inherent-variation floor
_RTV_SHARP = 0.02    # gradient floor of the reweighting


def _grad(s):
    gx = np.zeros_like(s)
    gy = np.zeros_like(s)
    gx[:, :-1] = s[:, 1:] - s[:, :-1]
    gy[:-1, :] = s[1:, :] - s[:-1, :]
    return gx, gy


def _window(a, sigma):
    return ndimage.gaussian_filter(a, sigma, mode="nearest", truncate=3.0)


def rtv_energy(s, target, lam, sigma):
    """Data fidelity plus lambda times windowed total over inherent variation."""
    gx, gy = _grad(s)
    ratio = (_window(np.abs(gx), sigma) / (np.abs(_window(gx, sigma)) + _RTV_EPS)
             + _window(np.abs(gy), sigma) / (np.abs(_window(gy, sigma)) + _RTV_EPS))
    return float(np.sum((s - target) ** 2) + lam * np.sum(ratio))


def _rtv_system(s, lam, sigma):
    gx, gy = _grad(s)
    # reweighting: inherent variation of the windowed gradient times the
    # reciprocal local gradient magnitude (sharpness floor)
    sharp = 1.0 / np.maximum(np.hypot(gx, gy), _RTV_SHARP)
    sx, sy = _grad(_window(s, sigma))
    wx = sharp / np.maximum(np.abs(sx), _RTV_EPS)
    wy = sharp / np.maximum(np.abs(sy), _RTV_EPS)
    wx[:, -1] = 0.0
    wy[-1, :] = 0.0
    h, w = s.shape
    n = h * w
    dx = -lam * wx.ravel()
    dy = -lam * wy.ravel()
    # each weight couples pixel p with its right / lower neighbour
    diag = 1.0 - dx - dy - np.concatenate(([0.0], dx[:-1])) - np.concatenate((np.zeros(w), dy[:-w]))
    return sparse.diags([diag, dx[:-1], dx[:-1], dy[:-w], dy[:-w]], [0, 1, -1, w, -w],
                        shape=(n, n), format="csc")


def smooth_rtv(img, lam=0.015, sigma=3.0, iters=4, return_energy=False):
    """Structure layer of ``img`` by relative-total-variation smoothing.

    Iteratively reweighted least squares on the [0, 1]-scaled image. Each
    candidate update is accepted through a backtracking step so the objective
    never increases. Warns with ``NonConvergenceWarning`` when the final
    relative change still exceeds 1e-2.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    f = as_float(img)
    scale = 255.0
    target = f / scale
    s = target.copy()
    energy = [rtv_energy(s, target, lam, sigma)]
    rel_change = 0.0
    for _ in range(iters):
        a = _rtv_system(s, lam, sigma)
        cand = spsolve(a, target.ravel(), permc_spec="MMD_AT_PLUS_A").reshape(s.shape)
        step = 1.0
        new_e = rtv_energy(cand, target, lam, sigma)
        while new_e > energy[-1] and step > 1e-3:
            step *= 0.5
            trial = s + step * (cand - s)
            new_e = rtv_energy(trial, target, lam, sigma)
            cand = trial if new_e <= energy[-1] else cand
        if new_e > energy[-1]:
            new_e, cand = energy[-1], s
        rel_change = float(np.linalg.norm(cand - s) / max(np.linalg.norm(s), 1e-12))
        s = cand
        energy.append(new_e)
    if rel_change > 1e-2:
        warnings.warn(f"RTV relative change {rel_change:.3g} after {iters} iterations",
                      NonConvergenceWarning, stacklevel=2)
    out = s * scale
    if return_energy:
        return out, energy
    return out


# ---------------------------------------------------------------------------
# circle localization


@lru_cache(maxsize=256)
def _ring(r):
    """Integer offsets (dy, dx) whose distance rounds to ``r``."""
    span = np.arange(-r - 1, r + 2)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    sel = np.floor(np.hypot(dy, dx) + 0.5) == r
    return dy[sel], dx[sel]


def pupil_seed(img, fraction=0.02):
    """Centroid (x, y) of the darkest ``fraction`` of pixels (stable order)."""
    img = as_gray(img)
    m = max(1, int(np.ceil(fraction * img.size)))
    idx = np.argsort(img.ravel(), kind="stable")[:m]
    ys, xs = np.unravel_index(idx, img.shape)
    return float(xs.mean()), float(ys.mean())


def hough_circle(edges, radii, center_ok, orientation_tol=None):
    """Circular Hough vote over edge pixels.

    ``center_ok(r, yy, xx)`` returns a boolean mask of admissible centres for
    radius ``r``. With ``orientation_tol`` set, an edge pixel only votes for
    centres lying along its edge normal (within the tolerance). Returns
    ``(votes, Circle)`` for the accumulator argmax; ties go to the smallest
    radius, then lowest cy, then lowest cx.
    """
    h, w = edges.shape
    ys, xs = edges.points()
    theta = edges.orientation[ys, xs]
    radii = [int(r) for r in radii]
    acc = np.zeros((len(radii), h, w), dtype=np.int64)
    yy, xx = np.mgrid[:h, :w]
    for i, r in enumerate(radii):
        dy, dx = _ring(r)
        cy = (ys[:, None] - dy[None, :]).ravel()
        cx = (xs[:, None] - dx[None, :]).ravel()
        inside = (cy >= 0) & (cy < h) & (cx >= 0) & (cx < w)
        if orientation_tol is not None:
            radial = np.arctan2(dy, dx)[None, :]
            diff = np.abs(np.mod(radial - theta[:, None] + np.pi / 2, np.pi) - np.pi / 2).ravel()
            inside &= diff <= orientation_tol
        flat = np.bincount(cy[inside] * w + cx[inside], minlength=h * w).reshape(h, w)
        acc[i] = np.where(center_ok(r, yy, xx), flat, 0)
    k = int(np.argmax(acc))
    ri, y, x = np.unravel_index(k, acc.shape)
    return int(acc[ri, y, x]), Circle(float(x), float(y), float(radii[ri]))


def default_ranges(shape):
    m = min(shape)
    return (10, 0.15 * m), (0.2 * m, 0.45 * m)


def _radius_span(rng):
    lo, hi = int(np.ceil(rng[0])), int(np.floor(rng[1]))
    if hi < lo or hi < 1:
        raise ValueError(f"empty radius range {rng}")
    return range(max(lo, 1), hi + 1)


def localize_circles(edges, img, r_pupil_range=None, r_iris_range=None,
                     iris_center_tol=15.0, orientation_tol=np.pi / 6,
                     seed_fraction=0.02, seed_radius_frac=0.25):
    """Two-stage pupil then iris localization.

    The pupil centre is searched within ``seed_radius_frac * min(w, h)`` of
    the dark-pixel seed; the iris centre within ``iris_center_tol`` px of the
    pupil centre, keeping the pupil strictly inside. A best bin with fewer
    votes than a quarter of the circumference raises ``NoPupilFound`` /
    ``NoIrisFound``.
    """
    img = as_gray(img)
    dp, di = default_ranges(img.shape)
    r_pupil_range = r_pupil_range or dp
    r_iris_range = r_iris_range or di
    sx, sy = pupil_seed(img, seed_fraction)
    reach = seed_radius_frac * min(img.shape)

    def pupil_ok(r, yy, xx):
        return np.hypot(xx - sx, yy - sy) <= reach

    if not edges.binary.any():
        raise NoPupilFound("edge map is empty")
    votes, pupil = hough_circle(edges, _radius_span(r_pupil_range), pupil_ok, orientation_tol)
    if votes < 0.25 * 2 * np.pi * pupil.r:
        raise NoPupilFound(f"best pupil bin has {votes} votes")

    def iris_ok(r, yy, xx):
        d = np.hypot(xx - pupil.cx, yy - pupil.cy)
        return (d <= iris_center_tol) & (d < r - pupil.r)

    iris_radii = [r for r in _radius_span(r_iris_range) if r > pupil.r]
    if not iris_radii:
        raise NoIrisFound("iris radius range lies below the pupil radius")
    votes, iris = hough_circle(edges, iris_radii, iris_ok, orientation_tol)
    if votes < 0.25 * 2 * np.pi * iris.r:
        raise NoIrisFound(f"best iris bin has {votes} votes")
    return pupil, iris


def _fit_circle(xs, ys):
    """Algebraic least-squares circle ``x^2 + y^2 + D x + E y + F = 0``."""
    a = np.column_stack([xs, ys, np.ones_like(xs)])
    (d, e, f), *_ = np.linalg.lstsq(a, -(xs**2 + ys**2), rcond=None)
    cx, cy = -d / 2, -e / 2
    return cx, cy, np.sqrt(max(cx**2 + cy**2 - f, 0.0))


def refine_circle(fine, circle, band=2.5, orientation_tol=np.pi / 6, max_shift=2.0,
                  min_fraction=0.25):
    """Sub-pixel refinement of a Hough circle on a fine-scale edge map.

    The coarse Hough bins inherit the inward drift of large elongated
    kernels on curved boundaries; a trimmed least-squares circle through the
    fine-scale sub-pixel edge points near the bin removes it. The input
    circle is returned unchanged when fewer than ``min_fraction`` of the
    circumference is supported or the fit moves by more than ``max_shift``.
    """
    ys, xs = fine.subpixel_points()
    iy, ix = fine.points()
    d = np.hypot(xs - circle.cx, ys - circle.cy)
    radial = np.arctan2(ys - circle.cy, xs - circle.cx)
    diff = np.abs(np.mod(radial - fine.orientation[iy, ix] + np.pi / 2, np.pi) - np.pi / 2)
    sel = (np.abs(d - circle.r) <= band) & (diff <= orientation_tol)
    need = min_fraction * 2 * np.pi * circle.r
    if sel.sum() < need:
        return circle
    xs, ys = xs[sel], ys[sel]
    cx, cy, r = _fit_circle(xs, ys)
    resid = np.abs(np.hypot(xs - cx, ys - cy) - r)
    keep = resid <= 1.0
    if keep.sum() < need:
        return circle
    cx, cy, r = _fit_circle(xs[keep], ys[keep])
    if max(np.hypot(cx - circle.cx, cy - circle.cy), abs(r - circle.r)) > max_shift or r <= 0:
        return circle
    return Circle(float(cx), float(cy), float(r))


# ---------------------------------------------------------------------------
# eyelids


ARCH_TOL = 0.003   # px^-1, tolerated reverse bend of a nearly straight lid


def _fit_parabola(xs, ys, trim=2.0):
    """Least-squares ``y = a x^2 + b x + c`` with one outlier-trimmed refit.

    Returns the coefficients and the inlier mask (residual <= ``trim`` px).
    """
    design = np.column_stack([xs**2, xs, np.ones_like(xs)])
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    resid = np.abs(design @ coef - ys)
    keep = resid <= max(trim, 2.5 * np.median(resid))
    if 3 <= keep.sum() < len(xs):
        coef, *_ = np.linalg.lstsq(design[keep], ys[keep], rcond=None)
    return coef, np.abs(design @ coef - ys) <= trim


def _refine_lid(fys, fxs, coef, x_range, band=7.0, min_points=10):
    """Refit a lid parabola on fine-scale points near the coarse curve.

    Coarse elongated kernels shift a lid margin by a few pixels toward the
    darker side; returns ``coef`` unchanged when the fine map lacks support
    or the refit leaves the band.
    """
    lo, hi = x_range
    near = (np.abs(fys - np.polyval(coef, fxs)) <= band) & (fxs >= lo) & (fxs <= hi)
    if near.sum() < min_points:
        return coef
    new, inl = _fit_parabola(fxs[near], fys[near], trim=1.0)
    if inl.sum() < min_points:
        return coef
    grid = np.linspace(lo, hi, 9)
    if np.max(np.abs(np.polyval(new, grid) - np.polyval(coef, grid))) > band:
        return coef
    return new


def fit_eyelids(edges, pupil, iris, min_points=10, margin=2.0, shape=None, pad=1.0,
                min_span=0.8, min_density=0.35, fine=None):
    """Boolean occlusion mask (True = eyelid) restricted to the iris disk.

    Candidate points are edge pixels strictly between the pupil and iris
    boundaries (``margin`` px clearance) whose normal is within 45 degrees of
    vertical. A parabola is fitted to the band above ``cy - r_p / 2`` and to
    the band below ``cy + r_p / 2``; bands with fewer than ``min_points``
    points are ignored, as are fits whose inliers number fewer than
    ``min_points`` or span less than ``min_span * r_iris`` horizontally
    (scattered texture residue rather than a lid margin), or fewer than
    ``min_density`` inliers per pixel of that span. A lid must arch the
    anatomical way (upper lid highest mid-iris, lower lid lowest), and fits
    curving more sharply than the iris circle are rejected. The mask extends
    ``pad`` px past each fitted curve so the half-covered boundary row counts
    as occluded. With a ``fine`` edge map, accepted curves are refitted on
    its sub-pixel points near the coarse curve.
    """
    shape = shape or edges.shape
    h, w = shape
    yy, xx = np.mgrid[:h, :w].astype(np.float64)
    disk = np.hypot(xx - iris.cx, yy - iris.cy) <= iris.r
    mask = np.zeros(shape, dtype=bool)
    ys, xs = edges.points()
    if ys.size == 0:
        return mask
    ysf, xsf = ys.astype(np.float64), xs.astype(np.float64)
    theta = edges.orientation[ys, xs]
    between = ((np.hypot(xsf - iris.cx, ysf - iris.cy) < iris.r - margin)
               & (np.hypot(xsf - pupil.cx, ysf - pupil.cy) > pupil.r + margin))
    horizontal = np.abs(np.sin(theta)) >= np.sin(np.pi / 4) - 1e-9
    cand = between & horizontal
    if fine is not None:
        fys, fxs = fine.subpixel_points()
        fy0, fx0 = fine.points()
        keep = ((np.abs(np.sin(fine.orientation[fy0, fx0])) >= np.sin(np.pi / 4) - 1e-9)
                & (np.hypot(fxs - iris.cx, fys - iris.cy) < iris.r - margin)
                & (np.hypot(fxs - pupil.cx, fys - pupil.cy) > pupil.r + margin))
        fys, fxs = fys[keep], fxs[keep]
    # (points, mask side, sign of the arch: the upper lid opens downward in
    # image rows, the lower lid upward)
    bands = [
        (cand & (ysf < pupil.cy - 0.5 * pupil.r), lambda curve: yy < curve + pad, 1.0),
        (cand & (ysf > pupil.cy + 0.5 * pupil.r), lambda curve: yy > curve - pad, -1.0),
    ]
    for sel, region, arch in bands:
        if sel.sum() < min_points:
            continue
        (a, b, c), inl = _fit_parabola(xsf[sel], ysf[sel])
        xi = xsf[sel][inl]
        if inl.sum() < min_points or np.ptp(xi) < min_span * iris.r:
            continue
        if inl.sum() < min_density * np.ptp(xi):
            continue    # a few aligned fragments, not a continuous margin
        if arch * a < -ARCH_TOL:
            continue    # bends the wrong way for an eyelid
        if abs(a) > 1.0 / (2.0 * iris.r):
            continue    # bends more than the limbus: a ring inside the iris, not a lid
        if fine is not None:
            a2, b2, c2 = _refine_lid(fys, fxs, (a, b, c), (xi.min(), xi.max()), min_points=min_points)
            if arch * a2 >= -ARCH_TOL and abs(a2) <= 1.0 / (2.0 * iris.r):
                a, b, c = a2, b2, c2
        curve = a * xx**2 + b * xx + c
        mask |= region(curve)
    return mask & disk


def segment(img, cfg=None):
    """RTV smoothing -> directional edges -> circle localization -> eyelid mask."""
    cfg = cfg or SegmentConfig()
    img = as_gray(img)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        structure = smooth_rtv(img, cfg.rtv_lambda, cfg.rtv_sigma, cfg.rtv_iters)
    edges = edge_map(structure, cfg)
    pupil, iris = localize_circles(edges, img, cfg.pupil_r, cfg.iris_r,
                                   cfg.iris_center_tol, cfg.orientation_tol)
    fine = None
    if cfg.refine and cfg.edge_method == "directional":
        fine = detect_edges(structure, "directional", scales=1,
                            directions=cfg.edge_directions, threshold=cfg.edge_threshold)
        p2, i2 = refine_circle(fine, pupil), refine_circle(fine, iris)
        if p2.r < i2.r and p2.distance_to(i2) < i2.r - p2.r:
            pupil, iris = p2, i2
    mask = fit_eyelids(edges, pupil, iris, shape=img.shape, fine=fine)
    return IrisGeometry(pupil, iris, mask)


def edge_map(structure, cfg):
    if cfg.edge_method == "directional":
        return detect_edges(structure, "directional", scales=cfg.edge_scales,
                            directions=cfg.edge_directions, threshold=cfg.edge_threshold)
    if cfg.edge_method == "canny":
        return detect_edges(structure, "canny", low=cfg.edge_threshold / 2, high=cfg.edge_threshold)
    return detect_edges(structure, cfg.edge_method, threshold=cfg.edge_threshold)

"""Seeded synthetic eye images with known geometry, used as a desk-scale corpus.

Each class owns a texture signature (a mix of radial/angular sinusoids plus a
band-limited random field in polar coordinates); each image draws its own
pupil/iris geometry, rotation, sensor noise and optional specular blob and
upper-eyelid occluder.
"""
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imaging import save_pgm

LID_DEPTH = (0.4, 0.65)


@dataclass(frozen=True)
class SyntheticEyeSpec:
    classes: int = 20
    images_per_class: int = 10
    size: int = 128
    seed: int = 0
    pupil_r: tuple = (12.0, 17.0)
    iris_r: tuple = (40.0, 48.0)
    center_jitter: float = 4.0
    pupil_offset: float = 1.5
    rotation_jitter: float = 10.0   # degrees, uniform in [-j, j]
    occlusion_prob: float = 0.15
    specular_prob: float = 1.0
    noise_sigma: float = 2.0

    def __post_init__(self):
        if self.classes < 1 or self.images_per_class < 1:
            raise ValueError("need at least one class and one image per class")
        if not self.pupil_r[1] < self.iris_r[0]:
            raise ValueError("pupil radii must stay below iris radii")
        if self.iris_r[1] + self.center_jitter + 2 > self.size / 2:
            raise ValueError("iris does not fit in the image")


@dataclass
class TextureSignature:
    base: float
    angular: np.ndarray     # integer angular frequencies
    radial: np.ndarray      # cycles across the iris width
    amplitude: np.ndarray
    phase: np.ndarray
    field: np.ndarray       # periodic-in-angle random field, (radial, angular)
    field_amp: float
    crypts: np.ndarray      # (k, 4): rho, alpha, size (radians of arc), depth
    collarette: tuple       # (rho, amplitude, width) of the ring between the two zones
    zone_offset: float      # pupillary-zone brightness relative to the ciliary zone


def class_signature(seed, label):
    rng = np.random.default_rng([seed, 7919, label])
    n = 3
    raw = rng.standard_normal((12, 48))
    # low-pass the field; wrap along the angular axis only
    field = ndimage.gaussian_filter(raw, (1.0, 1.5), mode=("nearest", "wrap"))
    field /= field.std()
    return TextureSignature(
        base=float(rng.uniform(60, 115)),
        angular=rng.integers(2, 40, size=n),
        radial=rng.uniform(0.5, 3.5, size=n),
        amplitude=rng.uniform(3, 25, size=n),
        phase=rng.uniform(0, 2 * np.pi, size=n),
        field=field,
        field_amp=float(rng.uniform(2, 20)),
        crypts=_crypts(rng),
        collarette=(float(rng.uniform(0.25, 0.45)), float(rng.uniform(-20, 20)),
                    float(rng.uniform(0.03, 0.08))),
        zone_offset=float(rng.uniform(-15, 15)),
    )


def _crypts(rng):
    k = int(rng.integers(3, 13))
    return np.column_stack([
        rng.uniform(0.15, 0.85, k), rng.uniform(0, 2 * np.pi, k),
        rng.uniform(0.08, 0.25, k), rng.uniform(10, 35, k),
    ])


def _field_lookup(field, rho, alpha):
    """Bilinear lookup, clamped radially and periodic in angle."""
    nr, na = field.shape
    r = np.clip(rho, 0, 1) * (nr - 1)
    a = np.mod(alpha, 2 * np.pi) / (2 * np.pi) * na
    return ndimage.map_coordinates(np.pad(field, ((0, 0), (0, 1)), mode="wrap"),
                                   [r, a], order=1, mode="nearest")


def iris_texture(sig, rho, alpha):
    t = sig.base + sig.field_amp * _field_lookup(sig.field, rho, alpha)
    for m, f, a, ph in zip(sig.angular, sig.radial, sig.amplitude, sig.phase):
        t = t + a * np.cos(m * alpha + 2 * np.pi * f * rho + ph)
    cr, camp, cw = sig.collarette
    t = t + camp * np.exp(-0.5 * ((rho - cr) / cw) ** 2)
    t = t + sig.zone_offset * _soft((rho - cr) * 20.0)
    # crypts: dark Gaussian spots fixed in polar iris coordinates
    for cr, ca, size, depth in sig.crypts:
        da = np.angle(np.exp(1j * (alpha - ca)))
        t = t - depth * np.exp(-0.5 * ((da / size) ** 2 + ((rho - cr) / (0.5 * size)) ** 2))
    # keep the iris well separated from the pupil and below the sclera, as in NIR images
    return np.clip(t, 50.0, 185.0)


def _soft(d, width=0.5):
    """Anti-aliased inside indicator for a signed distance (negative = inside)."""
    return np.clip(0.5 - d / (2 * width), 0.0, 1.0)


def render_eye(spec, label, index, rotation=None):
    """Render one eye. Returns ``(image uint8, truth dict, lid mask bool)``.

    ``rotation`` (degrees) overrides the drawn rotation jitter.
    """
    rng = np.random.default_rng([spec.seed, label, index])
    sig = class_signature(spec.seed, label)
    n = spec.size
    c = n / 2 - 0.5
    icx, icy = c + rng.uniform(-spec.center_jitter, spec.center_jitter, size=2)
    ir = rng.uniform(*spec.iris_r)
    pr = rng.uniform(*spec.pupil_r)
    off_a = rng.uniform(0, 2 * np.pi)
    off_r = rng.uniform(0, spec.pupil_offset)
    pcx, pcy = icx + off_r * np.cos(off_a), icy + off_r * np.sin(off_a)
    rot = rng.uniform(-spec.rotation_jitter, spec.rotation_jitter)
    if rotation is not None:
        rot = float(rotation)
    occluded = rng.random() < spec.occlusion_prob
    specular = rng.random() < spec.specular_prob
    # upper lid between roughly the top third of the iris and just above the pupil
    lid_k = icy - rng.uniform(max(LID_DEPTH[0] * ir, pr + spec.pupil_offset + 4), LID_DEPTH[1] * ir)
    lid_a = rng.uniform(0.002, 0.008)
    spec_pos = rng.uniform(-0.6, 0.6, size=2) * pr
    ramp = rng.uniform(-15, 15, size=2)
    noise = rng.standard_normal((n, n)) * spec.noise_sigma

    yy, xx = np.mgrid[:n, :n].astype(np.float64)
    dp = np.hypot(xx - pcx, yy - pcy)
    di = np.hypot(xx - icx, yy - icy)
    rho = (dp - pr) / (ir - pr)
    alpha = np.arctan2(yy - icy, xx - icx) - np.deg2rad(rot)

    sclera = 200 + ramp[0] * (xx - c) / n + ramp[1] * (yy - c) / n
    img = sclera.copy()
    in_iris = _soft(di - ir)
    img = img * (1 - in_iris) + iris_texture(sig, rho, alpha) * in_iris
    in_pupil = _soft(dp - pr)
    img = img * (1 - in_pupil) + 25.0 * in_pupil
    if specular:
        ds = np.hypot(xx - pcx - spec_pos[0], yy - pcy - spec_pos[1])
        img = np.maximum(img, 255.0 * _soft(ds - 3.0))
    lid = np.zeros((n, n), dtype=bool)
    if occluded:
        boundary = lid_k + lid_a * (xx - icx) ** 2
        in_lid = _soft(yy - boundary)
        img = img * (1 - in_lid) + (165 + 0.1 * (yy - lid_k)) * in_lid
        lid = yy < boundary
    img = np.clip(np.floor(img + noise + 0.5), 0, 255).astype(np.uint8)
    truth = {
        "label": int(label),
        "index": int(index),
        "pupil": [float(pcx), float(pcy), float(pr)],
        "iris": [float(icx), float(icy), float(ir)],
        "rotation_deg": float(rot),
        "occluded": bool(occluded),
        "eyelid": [float(lid_a), float(icx), float(lid_k)] if occluded else None,
        "specular": bool(specular),
    }
    return img, truth, lid


def occluder_mask(truth, shape):
    """Ground-truth eyelid region intersected with the iris disk."""
    h, w = shape
    yy, xx = np.mgrid[:h, :w].astype(np.float64)
    icx, icy, ir = truth["iris"]
    disk = np.hypot(xx - icx, yy - icy) <= ir
    if not truth.get("eyelid"):
        return np.zeros(shape, dtype=bool)
    a, h0, k = truth["eyelid"]
    return (yy < k + a * (xx - h0) ** 2) & disk


def subject_id(label):
    return f"S{label + 1:03d}"


def generate_synthetic(spec, out):
    """Write the corpus as ``<out>/<subject>/<subject>_<nn>.pgm`` plus ``ground_truth.json``.

    Returns the list of ``(subject_id, path)`` entries in ingest order.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    entries = []
    for label in range(spec.classes):
        sid = subject_id(label)
        (out / sid).mkdir(exist_ok=True)
        for i in range(spec.images_per_class):
            img, truth, _ = render_eye(spec, label, i)
            path = out / sid / f"{sid}_{i:02d}.pgm"
            save_pgm(path, img)
            truth.update(subject_id=sid, path=str(path.relative_to(out)))
            records.append(truth)
            entries.append((sid, path))
    payload = {"spec": asdict(spec), "images": records}
    (out / "ground_truth.json").write_text(json.dumps(payload, indent=1))
    return entries

"""Raster IO and the small spatial filters shared by every stage.

Gray images are plain ``numpy.uint8`` arrays of shape ``(height, width)``;
intermediate float maps are ``float64`` arrays of the same shape that must
stay finite. Windowed filters replicate edge pixels at the border.
"""
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import CorruptData, UnsupportedFormat

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def as_gray(img):
    """Validate/convert ``img`` to a 2-D uint8 array (values are clipped and rounded)."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains NaN or Inf")
    return np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)


def as_float(img):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("float image contains NaN or Inf")
    return arr


def rgb_to_luma(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    y = r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def _read_pgm(raw):
    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens = []
    pos = 0
    n = len(raw)
    while len(tokens) < 4:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise CorruptData("truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte before the raster
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise CorruptData(f"bad PGM header: {tokens!r}") from exc
    if width < 1 or height < 1:
        raise CorruptData("PGM dimensions must be positive")
    if maxval > 255:
        raise UnsupportedFormat("16-bit PGM is not supported")
    if maxval < 1:
        raise CorruptData("PGM maxval must be positive")
    data = raw[pos:pos + width * height]
    if len(data) != width * height:
        raise CorruptData(f"PGM raster truncated: {len(data)} of {width * height} bytes")
    img = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    if maxval != 255:
        img = as_gray(img.astype(np.float64) * (255.0 / maxval))
    return img.copy()


def _read_png(path):
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                return np.array(im, dtype=np.uint8)
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                raise UnsupportedFormat(f"unsupported PNG mode {mode}")
            if mode == "P":
                im = im.convert("RGB")
            elif mode in ("LA", "RGBA"):
                im = im.convert("RGBA")
            elif mode != "RGB":
                raise UnsupportedFormat(f"unsupported PNG mode {mode}")
            arr = np.array(im)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptData(f"cannot decode PNG {path}: {exc}") from exc
    return rgb_to_luma(arr[..., :3])


def load_image(path):
    """Read a binary PGM (P5) or 8-bit PNG as a uint8 gray image.

    Color PNGs are converted with the ITU-R 601 luma weights, rounded to
    nearest. Raises ``FileNotFoundError``, ``UnsupportedFormat`` or
    ``CorruptData``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    raw = path.read_bytes()
    if raw[:2] == b"P5":
        return _read_pgm(raw)
    if raw[:8] == _PNG_MAGIC:
        return _read_png(path)
    if raw[:2] in (b"P2", b"P3", b"P6"):
        raise UnsupportedFormat(f"only binary P5 PGM is supported: {path}")
    if len(raw) < 8 and (raw[:1] == b"P" or _PNG_MAGIC.startswith(raw)):
        raise CorruptData(f"truncated image file: {path}")
    raise UnsupportedFormat(f"unrecognised raster format: {path}")


def save_pgm(path, img):
    img = as_gray(img)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())


def median_filter(img, radius=1):
    """Median over the ``(2r+1)^2`` window with replicated borders."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    img = as_gray(img)
    return ndimage.median_filter(img, size=2 * radius + 1, mode="nearest")


def histogram256(img):
    """256-bin intensity counts; float inputs are rounded and clipped to [0, 255]."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = as_gray(arr) if arr.ndim == 2 else np.clip(np.floor(np.asarray(arr, float) + 0.5), 0, 255).astype(np.uint8)
    return np.bincount(arr.ravel(), minlength=256).astype(np.int64)


def gaussian_blur(img, sigma):
    """Separable normalized Gaussian, kernel truncated at 3 sigma, replicated borders."""
    return ndimage.gaussian_filter(as_float(img), sigma, mode="nearest", truncate=3.0)

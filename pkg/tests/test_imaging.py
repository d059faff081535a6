import numpy as np
import pytest
from PIL import Image

from irisrec.errors import CorruptData, UnsupportedFormat
from irisrec.imaging import (as_gray, gaussian_blur, histogram256, load_image, median_filter,
                             rgb_to_luma, save_pgm)


def test_pgm_roundtrip_2x2(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
    img = load_image(p)
    assert img.dtype == np.uint8
    assert img.tolist() == [[0, 128], [255, 64]]
    save_pgm(tmp_path / "b.pgm", img)
    assert np.array_equal(load_image(tmp_path / "b.pgm"), img)


def test_pgm_header_comments_and_maxval(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5 # comment\n3 1\n# another\n15\n" + bytes([0, 15, 5]))
    assert load_image(p).tolist() == [[0, 255, 85]]


def test_luma_examples():
    assert rgb_to_luma(np.array([[[255, 255, 255]]]))[0, 0] == 255
    assert rgb_to_luma(np.array([[[100, 200, 50]]]))[0, 0] == 153


def test_png_gray_and_color(tmp_path):
    gray = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    Image.fromarray(gray, mode="L").save(tmp_path / "g.png")
    assert np.array_equal(load_image(tmp_path / "g.png"), gray)
    rgb = np.zeros((2, 2, 3), np.uint8)
    rgb[...] = (100, 200, 50)
    Image.fromarray(rgb, mode="RGB").save(tmp_path / "c.png")
    assert np.all(load_image(tmp_path / "c.png") == 153)


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.pgm")
    (tmp_path / "ascii.pgm").write_bytes(b"P2\n1 1\n255\n7\n")
    with pytest.raises(UnsupportedFormat):
        load_image(tmp_path / "ascii.pgm")
    (tmp_path / "short.pgm").write_bytes(b"P5\n4 4\n255\n" + bytes(5))
    with pytest.raises(CorruptData):
        load_image(tmp_path / "short.pgm")
    (tmp_path / "deep.pgm").write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(UnsupportedFormat):
        load_image(tmp_path / "deep.pgm")
    (tmp_path / "junk.bin").write_bytes(b"hello world")
    with pytest.raises(UnsupportedFormat):
        load_image(tmp_path / "junk.bin")
    (tmp_path / "bad.png").write_bytes(b"\x89PNG\r\n\x1a\n" + b"\x00" * 20)
    with pytest.raises(CorruptData):
        load_image(tmp_path / "bad.png")


def test_as_gray_rejects_nan():
    with pytest.raises(ValueError):
        as_gray(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        as_gray(np.zeros(5))


def test_median_examples(rng):
    assert np.all(median_filter(np.full((6, 6), 7, np.uint8)) == 7)
    impulse = np.zeros((5, 5), np.uint8)
    impulse[2, 2] = 255
    assert not median_filter(impulse).any()
    img = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    out = median_filter(img, 1)
    pad = np.pad(img, 1, mode="edge")
    for y in range(16):
        for x in range(16):
            assert out[y, x] == sorted(pad[y:y + 3, x:x + 3].ravel())[4]


def test_histogram_examples(rng):
    h = histogram256(np.array([[0, 0], [255, 255]], np.uint8))
    assert h[0] == 2 and h[255] == 2 and h.sum() == 4
    assert histogram256(np.full((3, 5), 9, np.uint8))[9] == 15
    img = rng.integers(0, 256, (20, 30)).astype(np.uint8)
    assert histogram256(img).sum() == 600


def test_gaussian_blur_matches_direct_convolution():
    img = np.add.outer(np.arange(32.0), 3 * np.arange(32.0))
    sigma = 4.0
    rad = int(3 * sigma)
    t = np.arange(-rad, rad + 1)
    k = np.exp(-t**2 / (2 * sigma**2))
    k /= k.sum()
    pad = np.pad(img, rad, mode="edge")
    ref = np.zeros_like(img)
    for y in range(32):
        for x in range(32):
            ref[y, x] = k @ pad[y:y + 2 * rad + 1, x:x + 2 * rad + 1] @ k
    assert np.max(np.abs(gaussian_blur(img, sigma) - ref)) < 1e-6

import numpy as np
import pytest

from freqmask.imageio import from_uint8, jpeg_roundtrip, load_image, save_image, to_uint8
from freqmask.rng import make_rng


def test_white_image_loads_as_ones(tmp_path):
    path = tmp_path / "white.pgm"
    save_image(path, np.ones((2, 2, 1), dtype=np.float32))
    img = load_image(path)
    assert img.shape == (2, 2, 1)
    assert (img == 1.0).all()


def test_black_image_loads_as_zeros(tmp_path):
    path = tmp_path / "black.ppm"
    save_image(path, np.zeros((2, 2, 3), dtype=np.float32))
    assert (load_image(path) == 0.0).all()


@pytest.mark.parametrize("ext,channels", [(".pgm", 1), (".ppm", 3), (".png", 1), (".png", 3)])
def test_roundtrip_within_quantization(tmp_path, ext, channels):
    rng = make_rng(5)
    img = rng.random((9, 7, channels)).astype(np.float32)
    path = tmp_path / f"img{ext}"
    save_image(path, img)
    back = load_image(path)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 1.0 / 255.0 + 1e-7


def test_second_save_load_is_exact(tmp_path):
    # After one quantization pass the representation is a fixed point.
    rng = make_rng(6)
    img = rng.random((8, 8, 3)).astype(np.float32)
    p1, p2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
    save_image(p1, img)
    once = load_image(p1)
    save_image(p2, once)
    assert np.array_equal(load_image(p2), once)


def test_pnm_comment_is_skipped(tmp_path):
    path = tmp_path / "c.pgm"
    save_image(path, np.full((3, 4, 1), 0.5, dtype=np.float32), comment="hello world")
    img = load_image(path)
    assert img.shape == (3, 4, 1)
    assert b"# hello world" in path.read_bytes()


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.pgm")
    bad = tmp_path / "bad.xyz"
    bad.write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_image(bad)
    trunc = tmp_path / "trunc.pgm"
    trunc.write_bytes(b"P5\n4 4\n255\n\x00\x00")
    with pytest.raises(ValueError):
        load_image(trunc)


def test_uint8_conversion_roundtrip():
    arr = np.arange(256, dtype=np.uint8).reshape(16, 16, 1)
    assert np.array_equal(to_uint8(from_uint8(arr)), arr)


def test_save_rejects_mismatched_extension(tmp_path):
    with pytest.raises(ValueError):
        save_image(tmp_path / "x.pgm", np.zeros((2, 2, 3), dtype=np.float32))


def test_jpeg_roundtrip_close_at_high_quality():
    # Smooth content survives; noise would not, by codec design.
    x = np.linspace(0.2, 0.8, 32, dtype=np.float32)
    img = np.repeat((x[:, None] * x[None, :])[:, :, None], 3, axis=2)
    out = jpeg_roundtrip(img, 95)
    assert out.shape == img.shape
    assert np.abs(out - img).mean() < 0.02
    with pytest.raises(ValueError):
        jpeg_roundtrip(img, 0)


def test_jpeg_lower_quality_is_lossier():
    rng = make_rng(3)
    img = (0.25 + 0.5 * rng.random((32, 32, 3))).astype(np.float32)
    e30 = np.abs(jpeg_roundtrip(img, 30) - img).mean()
    e95 = np.abs(jpeg_roundtrip(img, 95) - img).mean()
    assert e30 > e95

"""Image values and raster I/O.

An image is a float32 array of shape (H, W, C) with C in {1, 3} and
values nominally in [0, 1]. Binary PGM (P5) and PPM (P6) are read and
written natively and are the bit-exact baseline formats; PNG goes
through Pillow.
"""

from __future__ import annotations

import io
import os

import numpy as np
from PIL import Image as PILImage


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check the (H, W, C) contract and return the array unchanged."""
    if not isinstance(img, np.ndarray) or img.ndim != 3:
        raise ValueError("image must be an (H, W, C) array")
    h, w, c = img.shape
    if h < 1 or w < 1:
        raise ValueError(f"image has zero dimension: {img.shape}")
    if c not in (1, 3):
        raise ValueError(f"image must have 1 or 3 channels, got {c}")
    return img


def to_uint8(img: np.ndarray) -> np.ndarray:
    """[0, 1] float -> rounded 8-bit, clipping out-of-range values."""
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return (arr.astype(np.float32) / 255.0).astype(np.float32)


def _read_pnm(data: bytes):
    # Header: magic, optional '#' comments, width, height, maxval.
    pos = 0

    def token():
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        return data[start:pos]

    magic = token()
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    w = int(token())
    h = int(token())
    maxval = int(token())
    if w < 1 or h < 1:
        raise ValueError("zero-dimension image")
    if maxval != 255:
        raise ValueError(f"only 8-bit PNM supported, maxval={maxval}")
    pos += 1  # single whitespace after maxval
    c = 1 if magic == b"P5" else 3
    raw = data[pos : pos + h * w * c]
    if len(raw) != h * w * c:
        raise ValueError("truncated PNM payload")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, c)


def _write_pnm(img8: np.ndarray, comment: str | None) -> bytes:
    h, w, c = img8.shape
    magic = b"P5" if c == 1 else b"P6"
    buf = io.BytesIO()
    buf.write(magic + b"\n")
    if comment:
        for line in comment.splitlines():
            buf.write(b"# " + line.encode("ascii") + b"\n")
    buf.write(f"{w} {h}\n255\n".encode("ascii"))
    buf.write(img8.tobytes())
    return buf.getvalue()


def load_image(path) -> np.ndarray:
    """Load PGM/PPM/PNG into a float32 (H, W, C) array scaled to [0, 1]."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    ext = os.path.splitext(path)[1].lower()
    if ext in (".pgm", ".ppm"):
        with open(path, "rb") as f:
            arr = _read_pnm(f.read())
    elif ext == ".png":
        with PILImage.open(path) as im:
            if im.mode in ("L", "I;16", "I"):
                im = im.convert("L")
            else:
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
    else:
        raise ValueError(f"unsupported image format: {path}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("zero-dimension image")
    return from_uint8(arr)


def save_image(path, img: np.ndarray, comment: str | None = None) -> None:
    """Write an image as 8-bit PGM/PPM/PNG depending on the extension."""
    validate_image(img)
    path = os.fspath(path)
    img8 = to_uint8(img)
    ext = os.path.splitext(path)[1].lower()
    if ext in (".pgm", ".ppm"):
        want = ".pgm" if img.shape[2] == 1 else ".ppm"
        if ext != want:
            raise ValueError(f"{ext} does not match channel count {img.shape[2]}")
        payload = _write_pnm(img8, comment)
        with open(path, "wb") as f:
            f.write(payload)
    elif ext == ".png":
        data = img8[:, :, 0] if img.shape[2] == 1 else img8
        PILImage.fromarray(data).save(path, format="PNG")
    else:
        raise ValueError(f"unsupported image format: {path}")


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """Encode/decode through baseline JPEG at the given 1-100 quality."""
    validate_image(img)
    if not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must be in [1, 100], got {quality}")
    img8 = to_uint8(img)
    data = img8[:, :, 0] if img.shape[2] == 1 else img8
    buf = io.BytesIO()
    PILImage.fromarray(data).save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    with PILImage.open(buf) as im:
        out = np.asarray(im, dtype=np.uint8)
    if out.ndim == 2:
        out = out[:, :, None]
    return from_uint8(out)

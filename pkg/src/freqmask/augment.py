"""Training-time augmentations: spatial and frequency masking, geometric
transforms, and the flip/crop/blur/JPEG preprocessing pipeline.

Masking counts are exact: with ratio r the number of masked units is
always ceil(r * population), where the population is pixels (H*W), full
grid patches, or frequency bins inside the chosen band. Evaluation
preprocessing is a separate, RNG-free code path (``eval_preprocess``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage

from . import imageio, transforms
from .rng import sample_without_replacement, uniform

BANDS = ("low", "mid", "high", "all")
MASK_DOMAINS = ("pixel", "patch", "frequency")
GEO_KINDS = ("rotate", "translate")
_CHANNEL_LETTERS = {"r": 0, "g": 1, "b": 2}


@dataclass(frozen=True)
class MaskSpec:
    """One masking augmentation: what to mask, how much, and where.

    ``channels`` is "all" or a string of letters from "rgb" (frequency
    domain only); ``band``, ``transform`` and ``symmetric`` are likewise
    frequency-only. ``patch_size`` applies to the patch domain.
    """

    domain: str = "frequency"
    ratio: float = 0.15
    patch_size: int = 8
    band: str = "all"
    channels: str = "all"
    transform: str = "fourier"
    symmetric: bool = False

    def __post_init__(self):
        if self.domain not in MASK_DOMAINS:
            raise ValueError(f"domain must be one of {MASK_DOMAINS}, got {self.domain!r}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must be in [0, 1], got {self.ratio}")
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.band not in BANDS:
            raise ValueError(f"band must be one of {BANDS}, got {self.band!r}")
        if self.transform not in transforms.TRANSFORM_KINDS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.channels != "all" and (
            not self.channels or any(c not in _CHANNEL_LETTERS for c in self.channels)
        ):
            raise ValueError(f"channels must be 'all' or letters from 'rgb', got {self.channels!r}")


@dataclass(frozen=True)
class GeoSpec:
    """One geometric augmentation (rotate or translate) with strength r."""

    kind: str
    ratio: float = 0.15

    def __post_init__(self):
        if self.kind not in GEO_KINDS:
            raise ValueError(f"kind must be one of {GEO_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must be in [0, 1], got {self.ratio}")


@dataclass(frozen=True)
class PipelineSpec:
    """Full training-time pipeline: flip -> random crop -> blur/JPEG ->
    the listed augmentations, in order."""

    flip_prob: float = 0.5
    crop_size: int = 224
    blur_prob: float = 0.0
    jpeg_prob: float = 0.0
    blur_sigma_range: tuple = (0.0, 3.0)
    jpeg_quality_range: tuple = (30, 100)
    augmentations: tuple = ()

    def __post_init__(self):
        for name in ("flip_prob", "blur_prob", "jpeg_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.crop_size < 1:
            raise ValueError(f"crop_size must be >= 1, got {self.crop_size}")
        object.__setattr__(self, "augmentations", tuple(self.augmentations))


def augmentation_to_dict(aug) -> dict:
    if isinstance(aug, MaskSpec):
        d = {"type": aug.domain, "ratio": aug.ratio}
        if aug.domain == "patch":
            d["patch_size"] = aug.patch_size
        if aug.domain == "frequency":
            d.update(band=aug.band, channels=aug.channels, transform=aug.transform, symmetric=aug.symmetric)
        return d
    if isinstance(aug, GeoSpec):
        return {"type": aug.kind, "ratio": aug.ratio}
    raise TypeError(f"not an augmentation: {aug!r}")


def augmentation_from_dict(d: dict):
    kind = d.get("type")
    ratio = float(d.get("ratio", 0.15))
    if kind in GEO_KINDS:
        return GeoSpec(kind=kind, ratio=ratio)
    if kind == "pixel":
        return MaskSpec(domain="pixel", ratio=ratio)
    if kind == "patch":
        return MaskSpec(domain="patch", ratio=ratio, patch_size=int(d.get("patch_size", 8)))
    if kind == "frequency":
        return MaskSpec(
            domain="frequency",
            ratio=ratio,
            band=d.get("band", "all"),
            channels=d.get("channels", "all"),
            transform=d.get("transform", "fourier"),
            symmetric=bool(d.get("symmetric", False)),
        )
    raise ValueError(f"unknown augmentation type {kind!r}")


def pipeline_to_dict(spec: PipelineSpec) -> dict:
    return {
        "flip_prob": spec.flip_prob,
        "crop_size": spec.crop_size,
        "blur_prob": spec.blur_prob,
        "jpeg_prob": spec.jpeg_prob,
        "blur_sigma_range": list(spec.blur_sigma_range),
        "jpeg_quality_range": list(spec.jpeg_quality_range),
        "augmentations": [augmentation_to_dict(a) for a in spec.augmentations],
    }


def pipeline_from_dict(d: dict) -> PipelineSpec:
    return PipelineSpec(
        flip_prob=float(d.get("flip_prob", 0.5)),
        crop_size=int(d.get("crop_size", 224)),
        blur_prob=float(d.get("blur_prob", 0.0)),
        jpeg_prob=float(d.get("jpeg_prob", 0.0)),
        blur_sigma_range=tuple(d.get("blur_sigma_range", (0.0, 3.0))),
        jpeg_quality_range=tuple(d.get("jpeg_quality_range", (30, 100))),
        augmentations=tuple(augmentation_from_dict(a) for a in d.get("augmentations", ())),
    )


def channel_indices(channels: str, num_channels: int) -> list[int]:
    """Resolve a channel-subset string against the image's channel count."""
    if channels == "all":
        return list(range(num_channels))
    idx = sorted({_CHANNEL_LETTERS[c] for c in channels})
    if any(i >= num_channels for i in idx):
        raise ValueError(f"channel spec {channels!r} invalid for {num_channels}-channel image")
    return idx


def mask_pixels(image: np.ndarray, ratio: float, rng) -> np.ndarray:
    """Zero exactly ceil(ratio * H * W) pixel positions across all channels."""
    imageio.validate_image(image)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    h, w, c = image.shape
    total = h * w
    m = math.ceil(ratio * total)
    out = image.copy()
    if m:
        pos = sample_without_replacement(rng, total, m)
        out.reshape(total, c)[pos] = 0.0
    return out


def mask_patches(image: np.ndarray, ratio: float, patch_size: int, rng) -> np.ndarray:
    """Zero exactly ceil(ratio * N) full grid patches, N = (H//p) * (W//p).

    Partial border strips (when H or W is not a multiple of the patch
    size) are never masked.
    """
    imageio.validate_image(image)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    h, w, _ = image.shape
    p = int(patch_size)
    if p < 1 or p > min(h, w):
        raise ValueError(f"patch_size {p} invalid for image {h}x{w}")
    gh, gw = h // p, w // p
    n = gh * gw
    m = math.ceil(ratio * n)
    out = image.copy()
    if m:
        chosen = sample_without_replacement(rng, n, m)
        for k in chosen:
            i, j = divmod(int(k), gw)
            out[i * p : (i + 1) * p, j * p : (j + 1) * p, :] = 0.0
    return out


def band_indices(h: int, w: int, band: str) -> np.ndarray:
    """(u, v) index pairs of the named band rectangle, row-major order.

    low:  0      <= u < H/4,   0      <= v < W/4
    mid:  H/4    <= u < 3H/4,  W/4    <= v < 3W/4
    high: 3H/4   <= u < H,     3W/4   <= v < W
    all:  the full grid. Bounds use integer floor.
    """
    if h < 4 or w < 4:
        raise ValueError(f"band geometry needs H, W >= 4, got {h}x{w}")
    if band == "low":
        us, ue, vs, ve = 0, h // 4, 0, w // 4
    elif band == "mid":
        us, ue, vs, ve = h // 4, (3 * h) // 4, w // 4, (3 * w) // 4
    elif band == "high":
        us, ue, vs, ve = (3 * h) // 4, h, (3 * w) // 4, w
    elif band == "all":
        us, ue, vs, ve = 0, h, 0, w
    else:
        raise ValueError(f"band must be one of {BANDS}, got {band!r}")
    uu, vv = np.meshgrid(np.arange(us, ue), np.arange(vs, ve), indexing="ij")
    return np.stack([uu.ravel(), vv.ravel()], axis=1).astype(np.int64)


def select_frequency_bins(h: int, w: int, band: str, ratio: float, rng) -> np.ndarray:
    """Pick ceil(ratio * |band|) distinct (u, v) bins from the band."""
    idx = band_indices(h, w, band)
    m = math.ceil(ratio * len(idx))
    sel = sample_without_replacement(rng, len(idx), m)
    return idx[sel]


def _mask_channel(channel: np.ndarray, bins: np.ndarray, kind: str, symmetric: bool):
    """Mask one channel's coefficients; returns (real output, imag residue).

    The imaginary residue is the max-abs imaginary part discarded by the
    real-part truncation (always 0 for the real-valued transforms).
    """
    coeffs = transforms.forward(channel, kind)
    h, w = channel.shape
    coeffs[bins[:, 0], bins[:, 1]] = 0
    if symmetric and kind == "fourier":
        coeffs[(h - bins[:, 0]) % h, (w - bins[:, 1]) % w] = 0
    if kind == "fourier":
        inv = np.fft.ifft2(coeffs)
        return inv.real, float(np.abs(inv.imag).max(initial=0.0))
    return transforms.inverse(coeffs, kind), 0.0


def mask_frequency(image: np.ndarray, spec: MaskSpec, rng) -> np.ndarray:
    """Zero ceil(r * |band|) coefficients per selected channel and invert.

    Channels are processed in ascending index order, each with its own
    bin draw; unselected channels pass through bit-identical. With
    ``symmetric`` set, each selected Fourier bin's Hermitian mirror is
    zeroed as well, which keeps the inverse real to machine precision.
    """
    imageio.validate_image(image)
    if spec.domain != "frequency":
        raise ValueError(f"mask_frequency needs a frequency-domain spec, got {spec.domain!r}")
    h, w, c = image.shape
    out = image.copy()
    for ci in channel_indices(spec.channels, c):
        bins = select_frequency_bins(h, w, spec.band, spec.ratio, rng)
        masked, _ = _mask_channel(image[:, :, ci].astype(np.float64), bins, spec.transform, spec.symmetric)
        out[:, :, ci] = masked.astype(np.float32)
    return out


def rotate_coords(theta_deg: float, x, y):
    """Apply the centered rotation matrix [[cos,-sin],[sin,cos]] to (x, y)."""
    t = math.radians(theta_deg)
    return (
        math.cos(t) * x - math.sin(t) * y,
        math.sin(t) * x + math.cos(t) * y,
    )


def rotate_by(image: np.ndarray, theta_deg: float) -> np.ndarray:
    """Rotate about the image center, bilinear sampling, zero fill."""
    imageio.validate_image(image)
    h, w, c = image.shape
    t = math.radians(theta_deg)
    cos_t, sin_t = math.cos(t), math.sin(t)
    cx, cy = (h - 1) / 2.0, (w - 1) / 2.0
    xo, yo = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    xo -= cx
    yo -= cy
    # Inverse map: source = R(-theta) applied to destination coordinates.
    xs = cos_t * xo + sin_t * yo + cx
    ys = -sin_t * xo + cos_t * yo + cy

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    out = np.zeros_like(image, dtype=np.float64)
    for dx in (0, 1):
        for dy in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            wgt = (fx if dx else 1 - fx) * (fy if dy else 1 - fy)
            valid = (xi >= 0) & (xi < h) & (yi >= 0) & (yi < w)
            xi_c = np.clip(xi, 0, h - 1)
            yi_c = np.clip(yi, 0, w - 1)
            contrib = image[xi_c, yi_c, :] * (wgt * valid)[:, :, None]
            out += contrib
    return out.astype(np.float32)


def rotate(image: np.ndarray, ratio: float, rng) -> np.ndarray:
    """Rotate by an angle drawn uniformly from [0, ratio * 180 degrees]."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    theta = uniform(rng, 0.0, ratio * 180.0)
    if theta == 0.0:
        return image.copy()
    return rotate_by(image, theta)


def translate_by(image: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Shift by dx columns (horizontal) and dy rows (vertical), zero fill."""
    imageio.validate_image(image)
    h, w, _ = image.shape
    out = np.zeros_like(image)
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src_r = slice(max(0, -dy), min(h, h - dy))
    src_c = slice(max(0, -dx), min(w, w - dx))
    dst_r = slice(max(0, dy), min(h, h + dy))
    dst_c = slice(max(0, dx), min(w, w + dx))
    out[dst_r, dst_c, :] = image[src_r, src_c, :]
    return out


def translate(image: np.ndarray, ratio: float, rng) -> np.ndarray:
    """Shift by integer offsets: dx ~ U{-floor(r*W) .. floor(r*W)}, dy likewise with H."""
    imageio.validate_image(image)
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    h, w, _ = image.shape
    bx = math.floor(ratio * w)
    by = math.floor(ratio * h)
    dx = int(rng.integers(-bx, bx + 1))
    dy = int(rng.integers(-by, by + 1))
    return translate_by(image, dx, dy)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1D Gaussian with radius ceil(3*sigma), normalized to sum 1."""
    radius = math.ceil(3.0 * sigma)
    if radius == 0:
        return np.array([1.0])
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect boundary handling."""
    imageio.validate_image(image)
    k = gaussian_kernel(sigma)
    if len(k) == 1:
        return image.copy()
    out = image.astype(np.float64)
    out = scipy.ndimage.convolve1d(out, k, axis=0, mode="reflect")
    out = scipy.ndimage.convolve1d(out, k, axis=1, mode="reflect")
    return out.astype(np.float32)


def degrade(image: np.ndarray, spec: PipelineSpec, rng) -> np.ndarray:
    """Random blur then random JPEG, each applied with its own probability."""
    out = image
    if uniform(rng, 0.0, 1.0) < spec.blur_prob:
        sigma = uniform(rng, float(spec.blur_sigma_range[0]), float(spec.blur_sigma_range[1]))
        out = gaussian_blur(out, sigma)
    if uniform(rng, 0.0, 1.0) < spec.jpeg_prob:
        qlo, qhi = int(spec.jpeg_quality_range[0]), int(spec.jpeg_quality_range[1])
        quality = int(rng.integers(qlo, qhi + 1))
        out = imageio.jpeg_roundtrip(out, quality)
    return out if out is not image else image.copy()


def random_crop(image: np.ndarray, crop_size: int, rng) -> np.ndarray:
    h, w, _ = image.shape
    if h < crop_size or w < crop_size:
        raise ValueError(f"image {h}x{w} smaller than crop {crop_size}")
    top = int(rng.integers(0, h - crop_size + 1))
    left = int(rng.integers(0, w - crop_size + 1))
    return image[top : top + crop_size, left : left + crop_size, :].copy()


def center_crop(image: np.ndarray, crop_size: int) -> np.ndarray:
    h, w, _ = image.shape
    if h < crop_size or w < crop_size:
        raise ValueError(f"image {h}x{w} smaller than crop {crop_size}")
    top = (h - crop_size) // 2
    left = (w - crop_size) // 2
    return image[top : top + crop_size, left : left + crop_size, :].copy()


def apply_augmentation(image: np.ndarray, aug, rng) -> np.ndarray:
    """Apply one MaskSpec or GeoSpec."""
    if isinstance(aug, MaskSpec):
        if aug.domain == "pixel":
            return mask_pixels(image, aug.ratio, rng)
        if aug.domain == "patch":
            return mask_patches(image, aug.ratio, aug.patch_size, rng)
        return mask_frequency(image, aug, rng)
    if isinstance(aug, GeoSpec):
        if aug.kind == "rotate":
            return rotate(image, aug.ratio, rng)
        return translate(image, aug.ratio, rng)
    raise TypeError(f"unsupported augmentation {aug!r}")


def train_pipeline(image: np.ndarray, spec: PipelineSpec, rng) -> np.ndarray:
    """Training path: flip -> random crop -> degrade -> augmentations in order."""
    imageio.validate_image(image)
    if uniform(rng, 0.0, 1.0) < spec.flip_prob:
        image = image[:, ::-1, :]
    out = random_crop(image, spec.crop_size, rng)
    out = degrade(out, spec, rng)
    for aug in spec.augmentations:
        out = apply_augmentation(out, aug, rng)
    return out


def eval_preprocess(image: np.ndarray, crop_size: int) -> np.ndarray:
    """Evaluation path: deterministic center crop, nothing else."""
    imageio.validate_image(image)
    return center_crop(image, crop_size)

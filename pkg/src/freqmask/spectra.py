"""Averaged frequency-spectrum artifact analysis.

Each image channel is high-passed (subtract a median-filtered copy),
standardized, and Fourier-transformed; log(1 + |F|) is averaged across
the sample set, shifted so DC sits at the center, and min-max normalized
to [0, 1]. Generator artifacts show up as bright localized peaks against
the smooth natural-image background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from . import imageio, transforms


@dataclass
class SpectrumReport:
    grid: np.ndarray  # (H, W) in [0, 1], DC centered
    log_grid: np.ndarray  # same layout, unnormalized mean log1p magnitude
    sample_count: int
    denoise_radius: int


def analyze(images, denoise_radius: int = 2) -> SpectrumReport:
    """Average the log-magnitude spectra of high-passed, standardized images."""
    images = list(images)
    if not images:
        raise ValueError("analyze needs at least one image")
    shape = images[0].shape
    acc = np.zeros(shape[:2], dtype=np.float64)
    count = 0
    size = 2 * int(denoise_radius) + 1
    for img in images:
        imageio.validate_image(img)
        if img.shape != shape:
            raise ValueError(f"mixed image dimensions: {img.shape} vs {shape}")
        for c in range(img.shape[2]):
            ch = img[:, :, c].astype(np.float64)
            residual = ch - scipy.ndimage.median_filter(ch, size=size, mode="reflect")
            residual -= residual.mean()
            residual /= np.sqrt(max(residual.var(), 1e-8))
            acc += np.log1p(np.abs(transforms.fft2(residual)))
            count += 1
    log_grid = transforms.fftshift(acc / count)
    lo, hi = log_grid.min(), log_grid.max()
    grid = (log_grid - lo) / (hi - lo) if hi > lo else np.zeros_like(log_grid)
    return SpectrumReport(
        grid=grid, log_grid=log_grid, sample_count=len(images), denoise_radius=int(denoise_radius)
    )


def shifted_coord(u: int, v: int, h: int, w: int):
    """Map an unshifted spectrum index (u, v) onto the DC-centered grid."""
    return (u + h // 2) % h, (v + w // 2) % w


def peak_background_ratio(report: SpectrumReport, coord_uv, window: int = 5, exclude: int = 1) -> float:
    """Spectral magnitude at an (unshifted) coordinate over its local background.

    Both values come from the averaged log grid mapped back to the
    magnitude scale; background is the median of the surrounding
    (2*window+1)^2 patch with the central (2*exclude+1)^2 block removed.
    """
    h, w = report.log_grid.shape
    r, c = shifted_coord(int(coord_uv[0]), int(coord_uv[1]), h, w)
    rows = np.arange(r - window, r + window + 1) % h
    cols = np.arange(c - window, c + window + 1) % w
    patch = report.log_grid[np.ix_(rows, cols)].copy()
    mid = window
    mask = np.ones_like(patch, dtype=bool)
    mask[mid - exclude : mid + exclude + 1, mid - exclude : mid + exclude + 1] = False
    background = float(np.expm1(np.median(patch[mask])))
    peak = float(np.expm1(report.log_grid[r, c]))
    return peak / max(background, 1e-9)


def replica_correlation(images, factor: int) -> float:
    """Mean per-bin correlation between low-band energy and its replica copy.

    Nearest-neighbour upsampling by ``factor`` tiles the subsampled
    spectrum, so the magnitude at ((u + H/factor) mod H, v) tracks the
    one at (u, v) image by image; for natural images the two bins are
    independent. Bin-wise sample correlations of log magnitude are
    averaged over a low-band patch.
    """
    images = list(images)
    h, w = images[0].shape[:2]
    step = h // factor
    us = np.arange(2, min(step // 2, h // 4))
    vs = np.arange(1, min(step // 2, w // 4))
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    base_samples = []
    replica_samples = []
    for img in images:
        mag = np.zeros((h, w), dtype=np.float64)
        for c in range(img.shape[2]):
            mag += np.abs(transforms.fft2(img[:, :, c].astype(np.float64)))
        logmag = np.log1p(mag)
        base_samples.append(logmag[uu, vv].ravel())
        replica_samples.append(logmag[(uu + step) % h, vv].ravel())
    base = np.stack(base_samples)  # (n_images, n_bins)
    replica = np.stack(replica_samples)
    base -= base.mean(axis=0)
    replica -= replica.mean(axis=0)
    num = (base * replica).sum(axis=0)
    den = np.sqrt((base**2).sum(axis=0) * (replica**2).sum(axis=0))
    corr = num / np.maximum(den, 1e-12)
    return float(corr.mean())


def render_heatmap(report: SpectrumReport, path, comment: str | None = None) -> None:
    """Write the report grid as an 8-bit grayscale image (PGM or PNG)."""
    imageio.save_image(path, report.grid.astype(np.float32)[:, :, None], comment=comment)


def dump_grid(report: SpectrumReport, path) -> None:
    """Raw grid values as tab-separated text, one image row per line."""
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for row in report.grid:
            f.write("\t".join(f"{v:.8f}" for v in row) + "\n")

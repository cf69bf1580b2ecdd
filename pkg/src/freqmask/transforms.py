"""2D frequency transforms over single image channels.

Conventions, fixed across the package:

* ``fft2`` is the plain unnormalized DFT
  F(u, v) = sum_x sum_y I(x, y) exp(-2*pi*i*(u*x/H + v*y/W)),
  and ``ifft2`` carries the 1/(H*W) factor and returns the real part.
* ``dct2``/``idct2`` are the orthonormal DCT-II / DCT-III pair.
* ``dwt2``/``idwt2`` are orthonormal Haar in the stacked Mallat layout:
  each level rewrites the current top-left low-pass block in place as
  [LL LH; HL HH], so the coefficient grid keeps the image's shape.
* ``fftshift`` moves the DC bin to (H//2, W//2).

All functions accept real (H, W) arrays; non-power-of-two sizes are fine.
"""

from __future__ import annotations

import numpy as np
import scipy.fft

TRANSFORM_KINDS = ("fourier", "cosine", "wavelet")
DEFAULT_WAVELET_LEVELS = 2


def _check_channel(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"expected a 2D channel, got shape {x.shape}")
    return x


def fft2(channel: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT of one channel; DC at index (0, 0)."""
    return np.fft.fft2(_check_channel(channel))


def ifft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse DFT with 1/(H*W) normalization; returns the real part."""
    spectrum = _check_channel(spectrum)
    return np.fft.ifft2(spectrum).real


def dct2(channel: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DCT-II."""
    return scipy.fft.dctn(_check_channel(channel), type=2, norm="ortho")


def idct2(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of ``dct2`` (orthonormal 2D DCT-III)."""
    return scipy.fft.idctn(_check_channel(coeffs), type=2, norm="ortho")


def _haar_fwd_axis(x: np.ndarray, axis: int) -> np.ndarray:
    even = np.take(x, np.arange(0, x.shape[axis], 2), axis=axis)
    odd = np.take(x, np.arange(1, x.shape[axis], 2), axis=axis)
    approx = (even + odd) / np.sqrt(2.0)
    detail = (even - odd) / np.sqrt(2.0)
    return np.concatenate([approx, detail], axis=axis)


def _haar_inv_axis(x: np.ndarray, axis: int) -> np.ndarray:
    n = x.shape[axis]
    approx = np.take(x, np.arange(0, n // 2), axis=axis)
    detail = np.take(x, np.arange(n // 2, n), axis=axis)
    even = (approx + detail) / np.sqrt(2.0)
    odd = (approx - detail) / np.sqrt(2.0)
    out = np.empty_like(x)
    idx_even = [slice(None)] * x.ndim
    idx_odd = [slice(None)] * x.ndim
    idx_even[axis] = slice(0, n, 2)
    idx_odd[axis] = slice(1, n, 2)
    out[tuple(idx_even)] = even
    out[tuple(idx_odd)] = odd
    return out


def dwt2(channel: np.ndarray, levels: int = DEFAULT_WAVELET_LEVELS) -> np.ndarray:
    """Multi-level orthonormal Haar transform (stacked layout)."""
    x = _check_channel(channel).astype(np.float64)
    h, w = x.shape
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if h % (1 << levels) or w % (1 << levels):
        raise ValueError(f"dimensions {x.shape} not divisible by 2^{levels}")
    out = x.copy()
    for lv in range(levels):
        hh, ww = h >> lv, w >> lv
        block = out[:hh, :ww]
        block = _haar_fwd_axis(block, axis=0)
        block = _haar_fwd_axis(block, axis=1)
        out[:hh, :ww] = block
    return out


def idwt2(coeffs: np.ndarray, levels: int = DEFAULT_WAVELET_LEVELS) -> np.ndarray:
    """Inverse of ``dwt2`` at the same level count."""
    x = _check_channel(coeffs).astype(np.float64)
    h, w = x.shape
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if h % (1 << levels) or w % (1 << levels):
        raise ValueError(f"dimensions {x.shape} not divisible by 2^{levels}")
    out = x.copy()
    for lv in range(levels - 1, -1, -1):
        hh, ww = h >> lv, w >> lv
        block = out[:hh, :ww]
        block = _haar_inv_axis(block, axis=1)
        block = _haar_inv_axis(block, axis=0)
        out[:hh, :ww] = block
    return out


def fftshift(spectrum: np.ndarray) -> np.ndarray:
    """Move the DC bin to the grid center (H//2, W//2)."""
    return np.fft.fftshift(_check_channel(spectrum))


def forward(channel: np.ndarray, kind: str, levels: int = DEFAULT_WAVELET_LEVELS) -> np.ndarray:
    """Dispatch to the forward transform named by ``kind``."""
    if kind == "fourier":
        return fft2(channel)
    if kind == "cosine":
        return dct2(channel)
    if kind == "wavelet":
        return dwt2(channel, levels)
    raise ValueError(f"unknown transform kind {kind!r}; expected one of {TRANSFORM_KINDS}")


def inverse(coeffs: np.ndarray, kind: str, levels: int = DEFAULT_WAVELET_LEVELS) -> np.ndarray:
    """Dispatch to the inverse transform named by ``kind``; output is real."""
    if kind == "fourier":
        return ifft2(coeffs)
    if kind == "cosine":
        return idct2(coeffs)
    if kind == "wavelet":
        return idwt2(coeffs, levels)
    raise ValueError(f"unknown transform kind {kind!r}; expected one of {TRANSFORM_KINDS}")

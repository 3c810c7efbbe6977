"""Grayscale conversion, centered 2-D Fourier magnitude, one-level Haar
wavelet analysis/synthesis, and the frequency-domain sharpness measure.

Images are plain float64 arrays: grayscale H x W, color H x W x 3. The
Fourier magnitude is unnormalized and zero-frequency centered; log
compression is left to the consumer so the raw transform stays comparable
against a direct DFT evaluation.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])

_SQRT2 = np.sqrt(2.0)


class DwtSubbands(NamedTuple):
    """One-level Haar subbands, each (H/2) x (W/2).

    ``hl`` carries vertical detail (intensity changes along image rows),
    ``lh`` horizontal detail, ``hh`` diagonal. The transform is orthonormal,
    so total squared energy over the four subbands equals the input's.
    """

    ll: np.ndarray
    hl: np.ndarray
    lh: np.ndarray
    hh: np.ndarray


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """BT.601 luma of an H x W x 3 image: 0.299 R + 0.587 G + 0.114 B."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {image.shape}")
    return image @ _LUMA


def dft2_magnitude(gray: np.ndarray) -> np.ndarray:
    """Magnitude of the unnormalized 2-D DFT, zero frequency at the center."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ValueError(f"expected an H x W grayscale image, got shape {gray.shape}")
    return np.abs(np.fft.fftshift(np.fft.fft2(gray)))


def _pad_even(gray: np.ndarray) -> np.ndarray:
    h, w = gray.shape
    if h % 2 == 0 and w % 2 == 0:
        return gray
    return np.pad(gray, ((0, h % 2), (0, w % 2)), mode="edge")


def dwt2_haar(gray: np.ndarray) -> DwtSubbands:
    """One-level orthonormal Haar analysis.

    Separable filters (1, 1)/sqrt(2) and (1, -1)/sqrt(2) over 2x2 blocks.
    Odd-sized inputs are edge-replicated to even first, so subbands are
    always ceil(H/2) x ceil(W/2).
    """
    gray = _pad_even(np.asarray(gray, dtype=np.float64))
    lo_w = (gray[:, 0::2] + gray[:, 1::2]) / _SQRT2
    hi_w = (gray[:, 0::2] - gray[:, 1::2]) / _SQRT2
    return DwtSubbands(
        ll=(lo_w[0::2] + lo_w[1::2]) / _SQRT2,
        hl=(hi_w[0::2] + hi_w[1::2]) / _SQRT2,
        lh=(lo_w[0::2] - lo_w[1::2]) / _SQRT2,
        hh=(hi_w[0::2] - hi_w[1::2]) / _SQRT2,
    )


def idwt2_haar(bands: DwtSubbands) -> np.ndarray:
    """Exact Haar synthesis; inverts dwt2_haar up to round-off."""
    ll, hl, lh, hh = (np.asarray(b, dtype=np.float64) for b in bands)
    if not (ll.shape == hl.shape == lh.shape == hh.shape):
        raise ValueError("all four subbands must share one shape, got "
                         f"{ll.shape}, {hl.shape}, {lh.shape}, {hh.shape}")
    h2, w2 = ll.shape
    lo_w = np.empty((2 * h2, w2))
    hi_w = np.empty((2 * h2, w2))
    lo_w[0::2] = (ll + lh) / _SQRT2
    lo_w[1::2] = (ll - lh) / _SQRT2
    hi_w[0::2] = (hl + hh) / _SQRT2
    hi_w[1::2] = (hl - hh) / _SQRT2
    out = np.empty((2 * h2, 2 * w2))
    out[:, 0::2] = (lo_w + hi_w) / _SQRT2
    out[:, 1::2] = (lo_w - hi_w) / _SQRT2
    return out


def sharpness_fm(gray: np.ndarray) -> float:
    """Frequency-domain sharpness: the fraction of DFT bins whose magnitude
    exceeds a thousandth of the peak. 1/(H*W) for a constant image (DC
    only), near 1 for broadband content, 0 for an all-zero image."""
    mag = dft2_magnitude(gray)
    peak = mag.max()
    if peak == 0.0:
        return 0.0
    return float((mag > peak / 1000.0).sum() / mag.size)

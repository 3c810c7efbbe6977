"""Rendered-vs-reference image quality: PSNR, single-scale SSIM, and the
spectral sharpness comparison, bundled into one report row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import sharpness_fm, to_grayscale

PSNR_CAP_DB = 99.0


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    sharpness_gen: float
    sharpness_ref: float
    lpips: float | None = None  # slot for externally computed values

    def csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in
                        (self.psnr, self.ssim, self.sharpness_gen, self.sharpness_ref))


METRICS_CSV_HEADER = "psnr,ssim,sharp_gen,sharp_ref"


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); identical images report the 99 dB cap."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


def _window_means(x: np.ndarray, win: int) -> np.ndarray:
    """Means over all win x win sliding windows via a summed-area table."""
    sat = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    sat[1:, 1:] = x.cumsum(axis=0).cumsum(axis=1)
    s = (sat[win:, win:] - sat[:-win, win:] - sat[win:, :-win] + sat[:-win, :-win])
    return s / (win * win)


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0, window: int = 8) -> float:
    """Single-scale SSIM with a uniform sliding window, averaged over all
    window positions. Color inputs are compared on their luma."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    if a.ndim == 3:
        a, b = to_grayscale(a), to_grayscale(b)
    if a.shape[0] < window or a.shape[1] < window:
        raise ValueError(f"images {a.shape} smaller than the {window}x{window} SSIM window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    mu_a = _window_means(a, window)
    mu_b = _window_means(b, window)
    var_a = _window_means(a * a, window) - mu_a ** 2
    var_b = _window_means(b * b, window) - mu_b ** 2
    cov = _window_means(a * b, window) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def report(gen: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> MetricReport:
    """PSNR and SSIM of the pair plus each image's spectral sharpness."""
    gen = np.asarray(gen, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    _check_pair(gen, ref)
    gen_gray = to_grayscale(gen) if gen.ndim == 3 else gen
    ref_gray = to_grayscale(ref) if ref.ndim == 3 else ref
    return MetricReport(
        psnr=psnr(gen, ref, peak),
        ssim=ssim(gen, ref, peak),
        sharpness_gen=sharpness_fm(gen_gray),
        sharpness_ref=sharpness_fm(ref_gray),
    )

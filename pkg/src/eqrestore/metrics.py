"""Image quality metrics: MSE, PSNR and SSIM.

PSNR uses peak 1.0 and is reported as 100 dB for a zero-MSE pair.  SSIM is
the mean of local statistics computed under an 11x11 Gaussian window
(std 1.5), constants K1 = 0.01, K2 = 0.03, dynamic range 1.0; windows are
taken fully inside the image (valid mode) so the scalar-loop reference in
the test suite can match it exactly; channels are averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .buffer import ImageBuffer
from .errors import DimensionError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    mse: float


def mse(a: ImageBuffer, b: ImageBuffer) -> float:
    _same_shape(a, b)
    diff = a.data - b.data
    return float(np.mean(diff * diff))


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    err = mse(a, b)
    if err == 0.0:
        return 100.0
    return float(10.0 * np.log10(1.0 / err))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
    _same_shape(a, b)
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise DimensionError(
            f"image {a.height}x{a.width} smaller than SSIM window {SSIM_WINDOW}")
    w = gaussian_window()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    vals = []
    for ch in range(a.channels):
        x = a.data[:, :, ch]
        y = b.data[:, :, ch]
        mu_x = _filter_valid(x, w)
        mu_y = _filter_valid(y, w)
        xx = _filter_valid(x * x, w) - mu_x * mu_x
        yy = _filter_valid(y * y, w) - mu_y * mu_y
        xy = _filter_valid(x * y, w) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def metric_report(a: ImageBuffer, b: ImageBuffer) -> MetricReport:
    return MetricReport(psnr=psnr(a, b), ssim=ssim(a, b), mse=mse(a, b))


def _filter_valid(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Correlate with w, keeping only fully-covered positions."""
    k = w.shape[0]
    h, ww = img.shape
    out = np.zeros((h - k + 1, ww - k + 1))
    for i in range(k):
        for j in range(k):
            out += w[i, j] * img[i:i + h - k + 1, j:j + ww - k + 1]
    return out


def _same_shape(a: ImageBuffer, b: ImageBuffer):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")

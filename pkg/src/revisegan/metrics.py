"""Image quality metrics: PSNR and single-scale SSIM.

Both metrics are symmetric in their arguments.  SSIM follows the standard
single-scale formulation: an 11x11 Gaussian window with sigma 1.5,
stabilizers ``C1 = (0.01 * peak)**2`` and ``C2 = (0.03 * peak)**2``, local
statistics taken over valid window positions only (no padding), averaged into
one score.  Color images are reduced to luma (ITU-R BT.601 weights) first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

__all__ = ["MetricResult", "psnr", "ssim", "rgb_to_luma", "write_metric_table"]

PSNR_CAP = 100.0

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class MetricResult:
    name: str
    per_sample: tuple[float, ...]
    mean: float


def _as_float(a):
    a = np.asarray(a.detach().cpu() if hasattr(a, "detach") else a, dtype=np.float64)
    return a


def psnr(a, b, peak: float) -> float:
    """Peak signal-to-noise ratio in dB, capped at 100 for identical inputs.

    Parameters
    ----------
    a, b : arrays of identical shape.
    peak : maximum possible signal value range (e.g. 255 for 8-bit images,
        2.0 for data in [-1, 1]).
    """
    a, b = _as_float(a), _as_float(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return PSNR_CAP
    return min(float(10.0 * np.log10(peak ** 2 / mse)), PSNR_CAP)


def rgb_to_luma(image) -> np.ndarray:
    """Collapse a (3, H, W) or (H, W, 3) image to (H, W) luma; pass 2-D through."""
    image = _as_float(image)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[0] == 3:
        return np.tensordot(LUMA_WEIGHTS, image, axes=1)
    if image.ndim == 3 and image.shape[-1] == 3:
        return image @ LUMA_WEIGHTS
    raise ValueError(f"expected a 2-D or 3-channel image, got shape {image.shape}")


def _gaussian_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    g = np.exp(-((np.arange(SSIM_WINDOW) - half) ** 2) / (2.0 * SSIM_SIGMA ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a, b, peak: float = 2.0) -> float:
    """Mean local structural similarity between two images.

    Inputs may be grayscale (H, W) or RGB; RGB is converted to luma.  Raises
    if the images are smaller than the 11x11 window.
    """
    a = rgb_to_luma(a)
    b = rgb_to_luma(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(
            f"images of shape {a.shape} are smaller than the {SSIM_WINDOW}x"
            f"{SSIM_WINDOW} SSIM window"
        )
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    w = _gaussian_window()

    mu_a = convolve2d(a, w, mode="valid")
    mu_b = convolve2d(b, w, mode="valid")
    var_a = convolve2d(a * a, w, mode="valid") - mu_a ** 2
    var_b = convolve2d(b * b, w, mode="valid") - mu_b ** 2
    cov = convolve2d(a * b, w, mode="valid") - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def write_metric_table(path, identifiers, results: list[MetricResult]):
    """Write a per-sample metric table plus one summary row as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [r.name for r in results])
        for i, ident in enumerate(identifiers):
            writer.writerow([ident] + [repr(r.per_sample[i]) for r in results])
        writer.writerow(["mean"] + [repr(r.mean) for r in results])

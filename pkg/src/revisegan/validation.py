"""Input validation helpers shared across the package.

Kept in one place so the estimator, the trainer and the functional modules
reject malformed inputs with consistent messages.  All helpers accept either
numpy arrays or torch tensors and return their input unchanged (no copies,
no dtype conversion).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_score_map",
    "check_image_batch",
    "check_same_shape",
    "check_region_bounds",
]


def _shape(a):
    return tuple(a.shape)


def check_score_map(values, expected_size: int | None = None):
    """Validate a square 2-D score map with values strictly inside (0, 1)."""
    arr = np.asarray(values.detach().cpu() if hasattr(values, "detach") else values)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"score map must be a square 2-D array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("score map is empty")
    if expected_size is not None and arr.shape[0] != expected_size:
        raise ValueError(
            f"score map side {arr.shape[0]} does not match the configured "
            f"scoremap_size {expected_size}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("score map contains non-finite values")
    if arr.min() <= 0.0 or arr.max() >= 1.0:
        raise ValueError(
            "score map values must lie strictly inside (0, 1); "
            f"got range [{arr.min()}, {arr.max()}]"
        )
    return arr


def check_image_batch(images, name: str = "images", size_multiple: int | None = None):
    """Validate a rank-4 (batch, channels, height, width) image batch."""
    if images.ndim != 4:
        raise ValueError(f"{name} must be rank-4 (B, C, H, W), got shape {_shape(images)}")
    b, c, h, w = images.shape
    if b == 0:
        raise ValueError(f"{name} has an empty batch dimension")
    if size_multiple is not None and (h % size_multiple or w % size_multiple):
        raise ValueError(
            f"{name} spatial size {h}x{w} must be divisible by {size_multiple}"
        )
    return images


def check_same_shape(a, b, name_a: str = "first", name_b: str = "second"):
    if _shape(a) != _shape(b):
        raise ValueError(
            f"{name_a} and {name_b} must share a shape, got {_shape(a)} vs {_shape(b)}"
        )
    return a, b


def check_region_bounds(region, height: int, width: int):
    """Ensure a region's pixel box lies inside an image of the given size."""
    if region.x0 < 0 or region.y0 < 0 or region.x1 > width or region.y1 > height:
        raise ValueError(
            f"region box [{region.x0}:{region.x1}) x [{region.y0}:{region.y1}) "
            f"falls outside a {height}x{width} image"
        )
    return region

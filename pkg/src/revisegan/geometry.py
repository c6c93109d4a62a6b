"""Region proposal geometry: from a patch-critic score map to an image-space square.

The patch critic scores every receptive-field patch of the input; dark (low)
cells mark poorly synthesized content.  The proposal slides a ``w x w`` window
over the score map, picks the window with the lowest mean score, and maps its
center back to image pixel coordinates, yielding a ``region_size`` square.

All functions here are pure and operate on plain numpy arrays; nothing is
learned and no gradients flow through the proposal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .validation import check_score_map

__all__ = [
    "GeometryConfig",
    "Region",
    "window_size",
    "scale_factor",
    "map_center",
    "find_min_window",
    "propose_region",
]


@dataclass(frozen=True)
class GeometryConfig:
    """Sizes tying the input image, the score map and the proposed region together.

    Attributes
    ----------
    image_size : int
        Side length of the (square) input image, in pixels.
    scoremap_size : int
        Side length of the (square) critic score map, in cells.  Must be >= 2.
    region_size : int
        Desired side length of the proposed region, in pixels.  Must be
        strictly smaller than ``image_size``.
    """

    image_size: int
    scoremap_size: int
    region_size: int

    def __post_init__(self):
        for name in ("image_size", "scoremap_size", "region_size"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if self.scoremap_size < 2:
            raise ValueError(
                f"scoremap_size must be >= 2 so a sliding window fits, "
                f"got {self.scoremap_size}"
            )
        if self.region_size >= self.image_size:
            raise ValueError(
                f"region_size must be smaller than image_size "
                f"({self.region_size} >= {self.image_size})"
            )


@dataclass(frozen=True)
class Region:
    """A proposed square region in image coordinates.

    ``center_x``/``center_y`` are the exact mapped center (may be fractional);
    ``x0``/``y0`` are the rounded-and-clamped top-left corner of the
    closed-open pixel box ``[x0, x0 + side) x [y0, y0 + side)``.
    ``window_center`` / ``window_side`` record the score-map window the region
    came from, and ``mean_score`` its mean cell value.
    """

    center_x: float
    center_y: float
    side: int
    x0: int
    y0: int
    window_center: tuple[float, float]
    window_side: int
    mean_score: float

    @property
    def x1(self) -> int:
        return self.x0 + self.side

    @property
    def y1(self) -> int:
        return self.y0 + self.side

    def summary(self) -> dict:
        """Compact dict used by the CLI ``propose`` output."""
        return {
            "cx": self.center_x,
            "cy": self.center_y,
            "side": self.side,
            "mean_score": self.mean_score,
        }


def window_size(cfg: GeometryConfig) -> int:
    """Score-map sliding-window side for a desired region size.

    Computes ``region_size * scoremap_size / image_size`` exactly, rounds
    half-to-even, and clamps the result into ``[1, scoremap_size - 1]``.
    """
    w = round(Fraction(cfg.region_size * cfg.scoremap_size, cfg.image_size))
    return min(max(w, 1), cfg.scoremap_size - 1)


def scale_factor(cfg: GeometryConfig, window: int) -> float:
    """Pixels-per-cell scale between window centers and region centers.

    ``(image_size - region_size) / (scoremap_size - window)``; requires
    ``window < scoremap_size``.
    """
    if window >= cfg.scoremap_size:
        raise ValueError(
            f"window ({window}) must be smaller than the score map "
            f"({cfg.scoremap_size}); the scale is undefined otherwise"
        )
    return (cfg.image_size - cfg.region_size) / (cfg.scoremap_size - window)


def map_center(window_center: tuple[float, float], scale: float) -> tuple[float, float]:
    """Map a score-map window center to image pixel coordinates (pure scaling)."""
    x_c, y_c = window_center
    return (scale * x_c, scale * y_c)


def _argmin_window(values: np.ndarray, window: int) -> tuple[int, int, float]:
    """Top-left index (row, col) and mean of the lowest-mean window, stride 1.

    Ties resolve to the smallest row index, then the smallest column index
    (row-major first occurrence).
    """
    means = sliding_window_view(values, (window, window)).mean(axis=(2, 3))
    flat = int(np.argmin(means))  # first occurrence == row-major tie-break
    row, col = divmod(flat, means.shape[1])
    return row, col, float(means[row, col])


def find_min_window(values: np.ndarray, window: int) -> tuple[tuple[float, float], float]:
    """Center ``(x_c, y_c)`` and mean of the lowest-mean ``window x window`` patch.

    The window slides with stride 1 and stays fully inside the map.  The
    center convention is ``top_left + window / 2`` in continuous cell
    coordinates (half-integer for even windows), with x along columns and
    y along rows.
    """
    values = np.asarray(values)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"score map must be a square 2-D array, got shape {values.shape}")
    if values.size == 0:
        raise ValueError("score map is empty")
    if not np.all(np.isfinite(values)):
        raise ValueError("score map contains non-finite values")
    if not 1 <= window <= values.shape[0]:
        raise ValueError(
            f"window must be in [1, {values.shape[0]}], got {window}"
        )
    row, col, mean = _argmin_window(values, window)
    return (col + window / 2.0, row + window / 2.0), mean


def propose_region(score_map: np.ndarray, cfg: GeometryConfig) -> Region:
    """Propose the most-fake region of an image from its critic score map.

    Composes :func:`window_size`, :func:`find_min_window`,
    :func:`scale_factor` and :func:`map_center`.  The returned pixel box is
    rounded half-to-even and clamped to lie inside the image; the center/scale
    arithmetic is exact (rational), so in divisible configurations the extreme
    windows map the box edges exactly onto 0 and ``image_size``.
    """
    values = check_score_map(score_map, expected_size=cfg.scoremap_size)
    w = window_size(cfg)
    row, col, mean = _argmin_window(values, w)

    tau = Fraction(cfg.image_size - cfg.region_size, cfg.scoremap_size - w)
    x_c = Fraction(2 * col + w, 2)
    y_c = Fraction(2 * row + w, 2)
    center_x = tau * x_c
    center_y = tau * y_c

    half = Fraction(cfg.region_size, 2)
    x0 = _clamp(round(center_x - half), 0, cfg.image_size - cfg.region_size)
    y0 = _clamp(round(center_y - half), 0, cfg.image_size - cfg.region_size)

    return Region(
        center_x=float(center_x),
        center_y=float(center_y),
        side=cfg.region_size,
        x0=x0,
        y0=y0,
        window_center=(float(x_c), float(y_c)),
        window_side=w,
        mean_score=mean,
    )


def _clamp(value: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, value))

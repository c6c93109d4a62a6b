"""Fake-mask compositing: paste the proposed fake region onto the real target.

``composite`` produces the "masked fake" the reviser judges: real everywhere
except inside the proposed box, where the generated pixels are pasted
verbatim (no blending, no requantization).  When the inputs are torch
tensors, gradients flow back to the generator through the pasted pixels only;
everything outside the box is a constant copy of the real image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch

from .geometry import Region
from .validation import check_image_batch, check_region_bounds, check_same_shape

__all__ = ["MaskedPair", "composite", "crop"]


@dataclass(frozen=True)
class MaskedPair:
    """Result of a fake-mask composite.

    ``masked_fake`` equals the real batch outside each sample's region box and
    the fake batch inside it.  ``real_crop``/``fake_crop`` are the per-sample
    region contents, stacked to (B, C, side, side).
    """

    masked_fake: torch.Tensor
    regions: tuple[Region, ...]
    real_crop: torch.Tensor
    fake_crop: torch.Tensor


def _clone(a):
    return a.clone() if torch.is_tensor(a) else a.copy()


def _broadcast_regions(regions, batch: int) -> tuple[Region, ...]:
    if isinstance(regions, Region):
        return (regions,) * batch
    regions = tuple(regions)
    if len(regions) != batch:
        raise ValueError(f"got {len(regions)} regions for a batch of {batch}")
    sides = {r.side for r in regions}
    if len(sides) > 1:
        raise ValueError(f"regions in one batch must share a side, got {sorted(sides)}")
    return regions


def composite(real, fake, regions) -> MaskedPair:
    """Paste each sample's fake region onto its real counterpart.

    Parameters
    ----------
    real, fake : (B, C, H, W) arrays or tensors of identical shape.
    regions : a single :class:`Region` applied to every sample, or one
        region per sample.
    """
    check_same_shape(real, fake, "real", "fake")
    check_image_batch(real, "real")
    b, _, h, w = real.shape
    regions = _broadcast_regions(regions, b)
    for r in regions:
        check_region_bounds(r, h, w)

    masked = _clone(real)
    for i, r in enumerate(regions):
        masked[i, :, r.y0:r.y1, r.x0:r.x1] = fake[i, :, r.y0:r.y1, r.x0:r.x1]

    return MaskedPair(
        masked_fake=masked,
        regions=regions,
        real_crop=crop(real, regions),
        fake_crop=crop(fake, regions),
    )


def crop(image, regions):
    """Extract the region box from an image (or one box per batch sample).

    Rank-3 input (C, H, W) with a single region returns a (C, side, side)
    copy; rank-4 input returns the per-sample crops stacked to
    (B, C, side, side).
    """
    if image.ndim == 3:
        if not isinstance(regions, Region):
            raise ValueError("a rank-3 image takes a single region")
        check_region_bounds(regions, image.shape[1], image.shape[2])
        return _clone(image[:, regions.y0:regions.y1, regions.x0:regions.x1])

    check_image_batch(image, "image")
    b, _, h, w = image.shape
    regions = _broadcast_regions(regions, b)
    for r in regions:
        check_region_bounds(r, h, w)
    pieces = [image[i, :, r.y0:r.y1, r.x0:r.x1] for i, r in enumerate(regions)]
    if torch.is_tensor(image):
        return torch.stack(pieces)
    import numpy as np

    return np.stack(pieces)

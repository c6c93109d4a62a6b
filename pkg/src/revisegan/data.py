"""Paired-image ingestion and the synthetic outline-to-filled-shape toy task.

Datasets are directories of side-by-side pairs: each PNG holds the condition
on the left half and the target on the right half.  The toy generator draws
random rectangles, ellipses and triangles; the condition shows only their
outlines, the target fills each kind with a fixed palette color, so the
mapping is deterministic and learnable in minutes at 64x64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

__all__ = ["ToyTaskSpec", "PairedImageDataset", "load_paired_dir", "load_pair_image",
           "make_toy_dataset", "to_unit_range", "to_uint8"]

SUPERSAMPLE = 4  # draw at 4x and downscale for anti-aliasing

DEFAULT_PALETTE = ((214, 64, 64), (64, 96, 214), (240, 178, 44))


def to_unit_range(arr: np.ndarray) -> np.ndarray:
    """Map uint8 [0, 255] to float32 [-1, 1]."""
    return arr.astype(np.float32) / 127.5 - 1.0


def to_uint8(arr) -> np.ndarray:
    """Map float [-1, 1] back to uint8, rounding to the nearest level."""
    arr = np.asarray(arr.detach().cpu() if hasattr(arr, "detach") else arr)
    return np.clip(np.rint((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class ToyTaskSpec:
    """Configuration of the synthetic outline-to-fill task."""

    image_size: int = 64
    min_shapes: int = 1
    max_shapes: int = 4
    palette: tuple = DEFAULT_PALETTE
    seed: int = 0

    def __post_init__(self):
        if self.image_size < 16:
            raise ValueError("toy images must be at least 16 px")
        if not 1 <= self.min_shapes <= self.max_shapes:
            raise ValueError("need 1 <= min_shapes <= max_shapes")
        if len(self.palette) < 3:
            raise ValueError("palette needs one color per shape kind (3)")


class PairedImageDataset:
    """In-memory dataset of (condition, target) tensors in [-1, 1].

    Samples are loaded eagerly in sorted filename order, so iteration order
    is deterministic.
    """

    def __init__(self, x: torch.Tensor, y: torch.Tensor, identifiers: list[str]):
        if len(x) != len(y) or len(x) != len(identifiers):
            raise ValueError("condition/target/identifier counts differ")
        self.x = x
        self.y = y
        self.identifiers = list(identifiers)

    def __len__(self):
        return len(self.identifiers)

    def __getitem__(self, i):
        return self.x[i], self.y[i], self.identifiers[i]

    def tensors(self):
        return self.x, self.y


def load_paired_dir(path, resolution: int, condition_side: str = "left") -> PairedImageDataset:
    """Load a directory of side-by-side pairs, split at the horizontal midpoint.

    Each image is split into two halves, each half resized to
    ``resolution x resolution`` (bicubic) and normalized to [-1, 1].
    ``condition_side`` selects which half is the condition.
    """
    path = Path(path)
    if condition_side not in ("left", "right"):
        raise ValueError(f"condition_side must be 'left' or 'right', got {condition_side!r}")
    files = sorted(
        p for p in path.iterdir()
        if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp")
    ) if path.is_dir() else []
    if not path.is_dir():
        raise ValueError(f"dataset directory does not exist: {path}")
    if not files:
        raise ValueError(f"no paired images found in {path}")

    xs, ys, ids = [], [], []
    for f in files:
        try:
            with Image.open(f) as img:
                img = img.convert("RGB")
                width, height = img.size
                if width % 2:
                    raise ValueError(f"{f.name}: width {width} is odd, cannot split A|B")
                left = img.crop((0, 0, width // 2, height))
                right = img.crop((width // 2, 0, width, height))
        except OSError as exc:
            raise ValueError(f"unreadable image {f}: {exc}") from exc
        if condition_side == "right":
            left, right = right, left
        halves = []
        for half in (left, right):
            if half.size != (resolution, resolution):
                half = half.resize((resolution, resolution), Image.BICUBIC)
            arr = to_unit_range(np.asarray(half))
            halves.append(torch.from_numpy(arr.transpose(2, 0, 1)))
        xs.append(halves[0])
        ys.append(halves[1])
        ids.append(f.stem)
    return PairedImageDataset(torch.stack(xs), torch.stack(ys), ids)


def load_pair_image(path, resolution: int, condition_side: str = "left"):
    """Load one side-by-side pair file as (condition, target) (1, C, H, W) tensors."""
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"pair image not found: {path}")
    with Image.open(path) as img:
        img = img.convert("RGB")
        width, height = img.size
        if width % 2:
            raise ValueError(f"{path.name}: width {width} is odd, cannot split A|B")
        left = img.crop((0, 0, width // 2, height))
        right = img.crop((width // 2, 0, width, height))
    if condition_side == "right":
        left, right = right, left
    halves = []
    for half in (left, right):
        if half.size != (resolution, resolution):
            half = half.resize((resolution, resolution), Image.BICUBIC)
        arr = to_unit_range(np.asarray(half))
        halves.append(torch.from_numpy(arr.transpose(2, 0, 1))[None])
    return halves[0], halves[1]


def _draw_sample(spec: ToyTaskSpec, rng: np.random.Generator):
    """Render one (condition, target) pair as PIL images."""
    big = spec.image_size * SUPERSAMPLE
    cond = Image.new("RGB", (big, big), (255, 255, 255))
    targ = Image.new("RGB", (big, big), (255, 255, 255))
    draw_c = ImageDraw.Draw(cond)
    draw_t = ImageDraw.Draw(targ)
    outline_w = SUPERSAMPLE

    n = int(rng.integers(spec.min_shapes, spec.max_shapes + 1))
    for _ in range(n):
        kind = int(rng.integers(3))
        color = tuple(spec.palette[kind])
        side = int(rng.uniform(0.22, 0.5) * big)
        x0 = int(rng.integers(0, big - side))
        y0 = int(rng.integers(0, big - side))
        box = (x0, y0, x0 + side, y0 + side)
        if kind == 0:
            draw_c.rectangle(box, outline=(0, 0, 0), width=outline_w)
            draw_t.rectangle(box, fill=color, outline=(0, 0, 0), width=outline_w)
        elif kind == 1:
            draw_c.ellipse(box, outline=(0, 0, 0), width=outline_w)
            draw_t.ellipse(box, fill=color, outline=(0, 0, 0), width=outline_w)
        else:
            pts = [(x0 + side // 2, y0), (x0, y0 + side), (x0 + side, y0 + side)]
            draw_c.polygon(pts, outline=(0, 0, 0), width=outline_w)
            draw_t.polygon(pts, fill=color, outline=(0, 0, 0), width=outline_w)

    size = (spec.image_size, spec.image_size)
    return cond.resize(size, Image.LANCZOS), targ.resize(size, Image.LANCZOS)


def make_toy_dataset(spec: ToyTaskSpec, n: int, out_dir) -> list[str]:
    """Write ``n`` paired samples plus a manifest; returns the identifiers.

    Sample ``i`` is drawn from an RNG seeded by ``(spec.seed, i)``, so the
    files are byte-identical across runs and independent of ``n``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if n == 0:
        return []
    identifiers = []
    for i in range(n):
        rng = np.random.default_rng([spec.seed, i])
        cond, targ = _draw_sample(spec, rng)
        pair = Image.new("RGB", (2 * spec.image_size, spec.image_size))
        pair.paste(cond, (0, 0))
        pair.paste(targ, (spec.image_size, 0))
        ident = f"toy_{i:05d}"
        pair.save(out_dir / f"{ident}.png")
        identifiers.append(ident)
    (out_dir / "manifest.txt").write_text("".join(f"{s}\n" for s in identifiers))
    return identifiers

import numpy as np
import pytest
import torch

from revisegan.config import TrainConfig
from revisegan.data import PairedImageDataset
from revisegan.geometry import Region


@pytest.fixture(autouse=True)
def _fixed_global_seed():
    torch.manual_seed(1234)
    np.random.seed(1234)


def tiny_config(**overrides) -> TrainConfig:
    """A config small enough that a train step takes tens of milliseconds."""
    base = dict(
        image_size=32,
        region_size=8,
        ngf=4,
        ndf=4,
        n_blocks=1,
        d_layers=1,
        dropout=0.5,
        batch_size=4,
        epochs=1,
        seed=7,
        checkpoint_every=1,
        sample_every=0,
    )
    base.update(overrides)
    return TrainConfig(**base).validate()


def random_dataset(n=8, size=32, channels=3, seed=0) -> PairedImageDataset:
    gen = torch.Generator().manual_seed(seed)
    x = torch.rand((n, channels, size, size), generator=gen) * 2 - 1
    y = torch.rand((n, channels, size, size), generator=gen) * 2 - 1
    return PairedImageDataset(x, y, [f"s{i:03d}" for i in range(n)])


def make_region(x0, y0, side, image_size=None) -> Region:
    """Region built directly from a pixel box, for masking tests."""
    return Region(
        center_x=x0 + side / 2,
        center_y=y0 + side / 2,
        side=side,
        x0=x0,
        y0=y0,
        window_center=(0.0, 0.0),
        window_side=1,
        mean_score=0.5,
    )

"""Conditional image-to-image translation with a region-proposing patch critic
and a penalized global reviser.

The patch critic's score map drives a sliding-window proposal of the most-fake
square region of each generated image; that region is pasted onto the real
target to form a "masked fake" which a gradient-penalized reviser learns to
tell from the real pair, steering the generator toward its worst local
artifacts.
"""

from .config import TrainConfig
from .data import PairedImageDataset, ToyTaskSpec, load_paired_dir, make_toy_dataset
from .estimator import ImageTranslator
from .geometry import GeometryConfig, Region, find_min_window, propose_region
from .losses import LossReport, ObjectiveWeights
from .masking import MaskedPair, composite, crop
from .metrics import psnr, ssim
from .models import PatchDiscriminator, ResnetGenerator, Reviser
from .trainer import TrainState, build_state, evaluate, load_state, save_state, train, train_step

__version__ = "0.1.0"

__all__ = [
    "GeometryConfig",
    "ImageTranslator",
    "LossReport",
    "MaskedPair",
    "ObjectiveWeights",
    "PairedImageDataset",
    "PatchDiscriminator",
    "Region",
    "ResnetGenerator",
    "Reviser",
    "ToyTaskSpec",
    "TrainConfig",
    "TrainState",
    "build_state",
    "composite",
    "crop",
    "evaluate",
    "find_min_window",
    "load_paired_dir",
    "load_state",
    "make_toy_dataset",
    "propose_region",
    "psnr",
    "save_state",
    "ssim",
    "train",
    "train_step",
    "__version__",
]

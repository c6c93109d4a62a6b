"""Scikit-learn style front door for the translation trainer.

``ImageTranslator`` wraps the full training loop behind the familiar
``fit`` / ``predict`` / ``transform`` surface so it composes with sklearn
tooling (``get_params``, ``set_params``, ``clone``, pipelines).  Inputs are
``(N, C, H, W)`` arrays in [-1, 1], a :class:`~revisegan.data.PairedImageDataset`,
or a path to a directory of side-by-side pairs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .config import TrainConfig
from .data import PairedImageDataset, load_paired_dir
from .metrics import ssim
from .trainer import geometry_for, propose_batch, train

__all__ = ["ImageTranslator"]


class ImageTranslator(BaseEstimator):
    """Conditional image-to-image translator trained with a region-proposing
    patch critic and a penalized reviser.

    Parameters mirror :class:`~revisegan.config.TrainConfig`; see that class
    for semantics.  ``d_layers=0`` picks the deepest patch critic that fits
    the image size.
    """

    def __init__(self, image_size=64, region_size=16, in_channels=3, out_channels=3,
                 ngf=64, ndf=64, n_blocks=9, d_layers=0, dropout=0.5,
                 alpha=10.0, beta=100.0, gamma=100.0, lambda_balance=0.5,
                 delta_scale=0.5, generator_adv="nonsaturating",
                 lr=2e-4, beta1=0.5, beta2=0.999, batch_size=8, epochs=5,
                 use_fake_mask=True, use_reviser=True, use_region_l1=True,
                 augment_flip=False, seed=0, deterministic=True, out_dir=None):
        self.image_size = image_size
        self.region_size = region_size
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.ngf = ngf
        self.ndf = ndf
        self.n_blocks = n_blocks
        self.d_layers = d_layers
        self.dropout = dropout
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.lambda_balance = lambda_balance
        self.delta_scale = delta_scale
        self.generator_adv = generator_adv
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.batch_size = batch_size
        self.epochs = epochs
        self.use_fake_mask = use_fake_mask
        self.use_reviser = use_reviser
        self.use_region_l1 = use_region_l1
        self.augment_flip = augment_flip
        self.seed = seed
        self.deterministic = deterministic
        self.out_dir = out_dir

    def _config(self) -> TrainConfig:
        return TrainConfig(
            image_size=self.image_size,
            region_size=self.region_size,
            in_channels=self.in_channels,
            out_channels=self.out_channels,
            ngf=self.ngf,
            ndf=self.ndf,
            n_blocks=self.n_blocks,
            d_layers=self.d_layers,
            dropout=self.dropout,
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            lambda_balance=self.lambda_balance,
            delta_scale=self.delta_scale,
            generator_adv=self.generator_adv,
            lr_g=self.lr,
            lr_d=self.lr,
            lr_r=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            batch_size=self.batch_size,
            epochs=self.epochs,
            use_fake_mask=self.use_fake_mask,
            use_reviser=self.use_reviser,
            use_region_l1=self.use_region_l1,
            augment_flip=self.augment_flip,
            seed=self.seed,
            deterministic=self.deterministic,
            out_dir=str(self.out_dir) if self.out_dir else "",
        ).validate()

    def _as_dataset(self, X, y=None) -> PairedImageDataset:
        if isinstance(X, PairedImageDataset):
            return X
        if isinstance(X, (str, Path)):
            return load_paired_dir(X, self.image_size)
        X = self._as_batch(X, "X")
        if y is None:
            raise ValueError("array input requires matching targets y")
        y = self._as_batch(y, "y")
        if X.shape != y.shape:
            raise ValueError(f"X and y shapes differ: {tuple(X.shape)} vs {tuple(y.shape)}")
        ids = [f"sample_{i:05d}" for i in range(len(X))]
        return PairedImageDataset(X, y, ids)

    def _as_batch(self, arr, name) -> torch.Tensor:
        t = torch.as_tensor(np.asarray(arr), dtype=torch.float32)
        if t.ndim != 4:
            raise ValueError(f"{name} must be rank-4 (N, C, H, W), got shape {tuple(t.shape)}")
        if t.shape[-2:] != (self.image_size, self.image_size):
            raise ValueError(
                f"{name} spatial size {tuple(t.shape[-2:])} does not match "
                f"image_size={self.image_size}"
            )
        return t

    def fit(self, X, y=None):
        """Train on paired data; X may be arrays (with y), a dataset, or a path."""
        dataset = self._as_dataset(X, y)
        config = self._config()
        state, rows = train(config, dataset)
        self.config_ = config
        self.state_ = state
        self.history_ = rows
        self.geometry_ = geometry_for(config, state.patch_d)
        return self

    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise NotFittedError("this ImageTranslator is not fitted yet; call fit first")

    def predict(self, X) -> np.ndarray:
        """Translate condition images; returns (N, C, H, W) float32 in [-1, 1]."""
        self._check_fitted()
        t = self._as_batch(X, "X")
        gen = self.state_.generator
        gen.eval()
        outs = []
        with torch.no_grad():
            for start in range(0, len(t), self.batch_size):
                outs.append(gen(t[start:start + self.batch_size]))
        return torch.cat(outs).numpy()

    def transform(self, X) -> np.ndarray:
        return self.predict(X)

    def score(self, X, y) -> float:
        """Mean SSIM between translated outputs and targets (higher is better)."""
        fake = self.predict(X)
        y = self._as_batch(y, "y").numpy()
        return float(np.mean([ssim(fake[i], y[i], peak=2.0) for i in range(len(fake))]))

    def propose(self, X):
        """Proposed most-fake regions for a batch of condition images."""
        self._check_fitted()
        t = self._as_batch(X, "X")
        self.state_.eval_mode()
        with torch.no_grad():
            fake = self.state_.generator(t)
            maps = self.state_.patch_d(t, fake)
        return propose_batch(maps, self.geometry_)

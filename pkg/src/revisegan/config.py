"""Run configuration: a flat, typed, dotted-key format with CLI overrides.

Config files are plain text, one ``key = value`` per line, ``#`` comments
allowed.  Keys are dotted (``weights.lambda``), values are typed per the
schema below, and unknown keys are rejected.  ``--set key=value`` overrides
win over the file.  Every run echoes its effective configuration so it can be
re-run exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .losses import ObjectiveWeights

__all__ = ["TrainConfig", "ConfigError", "parse_config_file", "parse_overrides",
           "config_from_sources", "format_config"]


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Everything a training run needs, serializable to flat key=value text."""

    # data
    data_dir: str = ""
    val_data_dir: str = ""
    image_size: int = 64
    in_channels: int = 3
    out_channels: int = 3
    augment_flip: bool = False

    # region proposal
    region_size: int = 16

    # models
    ngf: int = 64
    ndf: int = 64
    n_blocks: int = 9
    d_layers: int = 0  # stride-2 stages of the patch critic; 0 = pick from image size
    dropout: float = 0.5

    # objective
    alpha: float = 10.0
    beta: float = 100.0
    gamma: float = 100.0
    lambda_balance: float = 0.5
    delta_scale: float = 0.5
    generator_adv: str = "nonsaturating"  # or "one_minus"

    # optimization
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    lr_r: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 8
    epochs: int = 20
    seed: int = 0
    deterministic: bool = True

    # ablation variants
    use_fake_mask: bool = True
    use_reviser: bool = True
    use_region_l1: bool = True

    # run outputs
    out_dir: str = ""
    checkpoint_every: int = 5
    sample_every: int = 1
    max_samples: int = 8

    def weights(self) -> ObjectiveWeights:
        return ObjectiveWeights(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            lambda_balance=self.lambda_balance,
            delta_scale=self.delta_scale,
        )

    def validate(self):
        self.weights()  # range checks
        if self.image_size % 4:
            raise ConfigError(f"image_size must be divisible by 4, got {self.image_size}")
        if not 1 <= self.region_size < self.image_size:
            raise ConfigError(
                f"region_size must lie in [1, image_size), got {self.region_size}"
            )
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.generator_adv not in ("nonsaturating", "one_minus"):
            raise ConfigError(f"unknown generator_adv {self.generator_adv!r}")
        return self


# dotted config key -> TrainConfig field
KEYMAP = {
    "data.dir": "data_dir",
    "data.val_dir": "val_data_dir",
    "data.image_size": "image_size",
    "data.in_channels": "in_channels",
    "data.out_channels": "out_channels",
    "data.flip": "augment_flip",
    "region.size": "region_size",
    "model.ngf": "ngf",
    "model.ndf": "ndf",
    "model.n_blocks": "n_blocks",
    "model.d_layers": "d_layers",
    "model.dropout": "dropout",
    "weights.alpha": "alpha",
    "weights.beta": "beta",
    "weights.gamma": "gamma",
    "weights.lambda": "lambda_balance",
    "weights.delta_scale": "delta_scale",
    "objective.generator_adv": "generator_adv",
    "train.lr_g": "lr_g",
    "train.lr_d": "lr_d",
    "train.lr_r": "lr_r",
    "train.beta1": "beta1",
    "train.beta2": "beta2",
    "train.batch_size": "batch_size",
    "train.epochs": "epochs",
    "train.seed": "seed",
    "train.deterministic": "deterministic",
    "variant.fake_mask": "use_fake_mask",
    "variant.reviser": "use_reviser",
    "variant.region_l1": "use_region_l1",
    "run.out_dir": "out_dir",
    "run.checkpoint_every": "checkpoint_every",
    "run.sample_every": "sample_every",
    "run.max_samples": "max_samples",
}

_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}
_FIELD_TO_KEY = {v: k for k, v in KEYMAP.items()}


def _coerce(key: str, text: str):
    ftype = _FIELD_TYPES[KEYMAP[key]]
    text = text.strip()
    if ftype == "bool":
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if ftype == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if ftype == "float":
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    return text


def parse_config_file(path) -> dict:
    """Parse a key=value config file into a dotted-key dict."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        if key not in KEYMAP:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, text)
    return values


def parse_overrides(pairs) -> dict:
    """Parse repeated ``--set key=value`` overrides."""
    values = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value, got {pair!r}")
        key, text = (part.strip() for part in pair.split("=", 1))
        if key not in KEYMAP:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, text)
    return values


def config_from_sources(config_path=None, overrides=None, **direct) -> TrainConfig:
    """Build a validated TrainConfig from file < overrides < direct kwargs."""
    merged = {}
    if config_path:
        merged.update(parse_config_file(config_path))
    merged.update(parse_overrides(overrides))
    cfg = TrainConfig(**{KEYMAP[k]: v for k, v in merged.items()})
    for name, value in direct.items():
        if value is not None:
            setattr(cfg, name, value)
    return cfg.validate()


def config_to_mapping(cfg: TrainConfig) -> dict:
    return {_FIELD_TO_KEY[f.name]: getattr(cfg, f.name) for f in fields(TrainConfig)}


def format_config(cfg: TrainConfig) -> str:
    lines = []
    for key in sorted(KEYMAP):
        value = getattr(cfg, KEYMAP[key])
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"

"""Training orchestration: generate, propose, revise.

Each step runs the three-player update in a fixed order: (1) the generator
synthesizes a fake; (2) the patch critic scores it and the lowest-mean window
becomes the proposed region; (3) the fake region is pasted onto the real
target to form the masked fake; (4) the patch critic takes its update; (5)
the reviser takes its penalized update on real vs. masked fake; (6) the
generator takes its update on the weighted adversarial terms plus the two L1
terms.  Telemetry is one CSV row per step; checkpoints embed the full config
snapshot and round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw
from torchvision.utils import save_image

from .checkpoint import CheckpointError, config_hash, read_blobs, write_blobs
from .config import TrainConfig, config_to_mapping, format_config
from .geometry import GeometryConfig, Region, propose_region
from .losses import (
    LossReport,
    fake_nll,
    generator_loss,
    gradient_penalty,
    input_gradient_norms,
    l1_terms,
    patch_d_loss,
    perturb_inputs,
    real_nll,
)
from .masking import composite, crop
from .metrics import MetricResult, psnr, ssim, write_metric_table
from .models import PatchDiscriminator, ResnetGenerator, Reviser, init_weights, max_strided_stages

__all__ = [
    "TrainState",
    "TrainingDiverged",
    "architecture_mapping",
    "build_state",
    "geometry_for",
    "propose_batch",
    "patch_critic_update",
    "reviser_update",
    "generator_update",
    "train_step",
    "train",
    "evaluate",
    "save_state",
    "load_state",
    "TELEMETRY_HEADER",
]

TELEMETRY_HEADER = ("step", "epoch") + LossReport.FIELDS


class TrainingDiverged(RuntimeError):
    """Raised when a step produces a non-finite loss; training aborts and the
    most recent checkpoint on disk is retained."""


@dataclass
class TrainState:
    generator: ResnetGenerator
    patch_d: PatchDiscriminator
    reviser: Reviser
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    opt_r: torch.optim.Adam
    noise_rng: torch.Generator
    step: int = 0
    epoch: int = 0
    scoremap_epoch_means: list = field(default_factory=list)

    def networks(self):
        return {"g": self.generator, "d": self.patch_d, "r": self.reviser}

    def optimizers(self):
        return {"g": self.opt_g, "d": self.opt_d, "r": self.opt_r}

    def train_mode(self):
        for net in self.networks().values():
            net.train()

    def eval_mode(self):
        for net in self.networks().values():
            net.eval()


def _d_layers(config: TrainConfig) -> int:
    return config.d_layers if config.d_layers > 0 else max_strided_stages(config.image_size)


def architecture_mapping(config: TrainConfig) -> dict:
    """The config subset that fixes network shapes; resume requires it to match
    (training flags, weights and rates may change between runs)."""
    return {
        "image_size": config.image_size,
        "in_channels": config.in_channels,
        "out_channels": config.out_channels,
        "ngf": config.ngf,
        "ndf": config.ndf,
        "n_blocks": config.n_blocks,
        "d_layers": _d_layers(config),
    }


def build_state(config: TrainConfig) -> TrainState:
    """Construct freshly initialized networks, optimizers and RNG state."""
    config.validate()
    init_rng = torch.Generator().manual_seed(config.seed)
    cond_ch, out_ch = config.in_channels, config.out_channels
    generator = ResnetGenerator(cond_ch, out_ch, config.ngf, config.n_blocks, config.dropout)
    patch_d = PatchDiscriminator(cond_ch + out_ch, config.ndf, _d_layers(config))
    reviser = Reviser(cond_ch + out_ch, config.ndf, config.image_size)
    for net in (generator, patch_d, reviser):
        init_weights(net, init_rng)

    if patch_d.receptive_field > config.image_size:
        raise ValueError(
            f"patch critic receptive field {patch_d.receptive_field} exceeds "
            f"image_size {config.image_size}; reduce model.d_layers"
        )
    if patch_d.scoremap_size(config.image_size) < 2:
        raise ValueError("score map would be smaller than 2x2; reduce model.d_layers")

    def adam(net, lr):
        return torch.optim.Adam(net.parameters(), lr=lr, betas=(config.beta1, config.beta2))

    noise_rng = torch.Generator().manual_seed(config.seed + 1)
    return TrainState(
        generator=generator,
        patch_d=patch_d,
        reviser=reviser,
        opt_g=adam(generator, config.lr_g),
        opt_d=adam(patch_d, config.lr_d),
        opt_r=adam(reviser, config.lr_r),
        noise_rng=noise_rng,
    )


def geometry_for(config: TrainConfig, patch_d: PatchDiscriminator) -> GeometryConfig:
    return GeometryConfig(
        image_size=config.image_size,
        scoremap_size=patch_d.scoremap_size(config.image_size),
        region_size=config.region_size,
    )


def propose_batch(score_maps: torch.Tensor, geometry: GeometryConfig) -> list[Region]:
    """One region per sample from a (B, 1, s, s) batch of score maps."""
    maps = score_maps.detach().cpu().numpy()
    return [propose_region(maps[i, 0], geometry) for i in range(maps.shape[0])]


def _reviser_active(config: TrainConfig) -> bool:
    return config.use_reviser and config.lambda_balance > 0.0


def patch_critic_update(state: TrainState, x, y, fake, geometry: GeometryConfig):
    """Step the patch critic on real vs. fake; the same forward also yields the
    per-sample region proposals (taken before the update applies)."""
    state.opt_d.zero_grad(set_to_none=True)
    scores_real = state.patch_d(x, y)
    scores_fake = state.patch_d(x, fake.detach())
    regions = propose_batch(scores_fake, geometry)
    loss = patch_d_loss(scores_real, scores_fake)
    loss.backward()
    state.opt_d.step()
    return float(loss.detach()), regions


def reviser_update(state: TrainState, x, y, y_mask, config: TrainConfig):
    """Step the reviser on real pairs vs. masked fakes with the gradient-norm
    penalty anchored at perturbed real targets."""
    state.opt_r.zero_grad(set_to_none=True)
    p_real = state.reviser(x, y)
    p_fake = state.reviser(x, y_mask.detach())
    perturbed = perturb_inputs(y, config.delta_scale, state.noise_rng)
    norms = input_gradient_norms(lambda t: state.reviser(x, t), perturbed)
    penalty = gradient_penalty(norms, config.alpha)
    loss = real_nll(p_real) + fake_nll(p_fake) + penalty
    loss.backward()
    state.opt_r.step()
    return float(loss.detach()), float(penalty.detach())


def generator_update(state: TrainState, x, y, fake, y_mask, real_crop, fake_crop,
                     config: TrainConfig):
    """Step the generator on the weighted adversarial terms plus both L1 terms."""
    weights = config.weights()
    if not config.use_reviser:
        # reviser disabled: full patch-critic pressure, Pix2pix-style
        weights = replace(weights, lambda_balance=0.0)
    lam = weights.lambda_balance
    adv = real_nll if config.generator_adv == "nonsaturating" else fake_nll

    state.opt_g.zero_grad(set_to_none=True)

    # fresh critic forwards after their own updates; a zero-coefficient term is
    # evaluated without a graph so it exerts exactly no gradient on G
    with torch.set_grad_enabled(lam < 1.0):
        scores_fake = state.patch_d(x, fake if lam < 1.0 else fake.detach())
    p_mask = state.reviser(x, y_mask) if lam > 0.0 else None

    l1_full, l1_region = l1_terms(y, fake, real_crop, fake_crop, weights)
    if not config.use_region_l1:
        l1_region = torch.zeros(())
    total = generator_loss(scores_fake, p_mask, l1_full, l1_region, weights,
                           mode=config.generator_adv)
    total.backward()
    state.opt_g.step()

    return {
        "g_adv_patch": float(adv(scores_fake.detach())),
        "g_adv_reviser": float(adv(p_mask.detach())) if p_mask is not None else 0.0,
        "l1_full": float(l1_full.detach()),
        "l1_region": float(l1_region.detach()),
        "total_g": float(total.detach()),
        "scoremap_mean": float(scores_fake.detach().mean()),
    }


def train_step(state: TrainState, batch, config: TrainConfig,
               geometry: GeometryConfig) -> LossReport:
    """One full three-player update on a (condition, target) batch."""
    x, y = batch
    state.train_mode()

    fake = state.generator(x, state.noise_rng)
    d_loss, regions = patch_critic_update(state, x, y, fake, geometry)

    if config.use_fake_mask:
        pair = composite(y, fake, regions)
        y_mask, real_crop, fake_crop = pair.masked_fake, pair.real_crop, pair.fake_crop
    else:
        y_mask = fake
        real_crop = crop(y, regions)
        fake_crop = crop(fake, regions)

    if _reviser_active(config):
        r_loss, penalty = reviser_update(state, x, y, y_mask, config)
    else:
        r_loss, penalty = 0.0, 0.0

    parts = generator_update(state, x, y, fake, y_mask, real_crop, fake_crop, config)
    state.step += 1
    return LossReport(d_loss=d_loss, r_loss=r_loss, penalty=penalty, **parts)


def _shuffle(n: int, seed: int, epoch: int) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed * 1_000_003 + epoch)
    return torch.randperm(n, generator=gen)


def train(config: TrainConfig, dataset, resume_from=None):
    """Run the configured number of epochs over a paired dataset.

    Returns ``(state, rows)`` where ``rows`` are the telemetry dicts, one per
    step.  With ``config.out_dir`` set, also writes the effective config, a
    telemetry CSV, periodic sample grids, score-map heatmaps with the
    proposed region drawn in, and checkpoints every ``checkpoint_every``
    epochs (plus the final epoch).
    """
    config.validate()
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if config.deterministic:
        torch.manual_seed(config.seed)
        torch.use_deterministic_algorithms(True)

    if resume_from is not None:
        state, loaded = load_state(resume_from)
        if config_hash(architecture_mapping(loaded)) != config_hash(architecture_mapping(config)):
            raise CheckpointError(
                "checkpoint networks do not match the requested configuration; "
                "resume requires identical architecture settings"
            )
        # the resumed run's optimizer hyperparameters govern from here on
        for opt, lr in ((state.opt_g, config.lr_g), (state.opt_d, config.lr_d),
                        (state.opt_r, config.lr_r)):
            for group in opt.param_groups:
                group["lr"] = lr
                group["betas"] = (config.beta1, config.beta2)
    else:
        state = build_state(config)
    geometry = geometry_for(config, state.patch_d)

    out_dir = Path(config.out_dir) if config.out_dir else None
    telemetry = None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "effective.cfg").write_text(format_config(config))
        fresh = resume_from is None or not (out_dir / "telemetry.csv").exists()
        telemetry = open(out_dir / "telemetry.csv", "w" if fresh else "a", newline="")
        writer = csv.writer(telemetry)
        if fresh:
            writer.writerow(TELEMETRY_HEADER)

    X, Y = dataset.tensors()
    n = len(dataset)
    rows = []
    try:
        for epoch in range(state.epoch + 1, config.epochs + 1):
            perm = _shuffle(n, config.seed, epoch)
            epoch_scores = []
            for start in range(0, n, config.batch_size):
                idx = perm[start:start + config.batch_size]
                xb, yb = X[idx], Y[idx]
                if config.augment_flip:
                    coins = torch.rand(len(xb), generator=state.noise_rng) < 0.5
                    xb[coins] = xb[coins].flip(-1)
                    yb[coins] = yb[coins].flip(-1)

                report = train_step(state, (xb, yb), config, geometry)
                row = dict(zip(TELEMETRY_HEADER, (state.step, epoch) + report.values()))
                rows.append(row)
                if telemetry:
                    writer.writerow([row["step"], row["epoch"]]
                                    + [repr(row[f]) for f in LossReport.FIELDS])
                if not all(math.isfinite(v) for v in report.values()):
                    bad = {k: v for k, v in row.items() if isinstance(v, float)
                           and not math.isfinite(v)}
                    raise TrainingDiverged(
                        f"non-finite loss at step {state.step} (epoch {epoch}): {bad}"
                    )
                epoch_scores.append(report.scoremap_mean)

            state.epoch = epoch
            state.scoremap_epoch_means.append(float(np.mean(epoch_scores)))
            if telemetry:
                telemetry.flush()
            if out_dir and config.sample_every and epoch % config.sample_every == 0:
                export_visuals(state, X, Y, geometry, config, out_dir, epoch)
            if out_dir and (epoch % config.checkpoint_every == 0 or epoch == config.epochs):
                save_state(out_dir / "checkpoints" / f"epoch_{epoch:04d}.ckpt",
                           state, config)
    finally:
        if telemetry:
            telemetry.close()
    return state, rows


def export_visuals(state, X, Y, geometry, config, out_dir, epoch):
    """Sample grid (condition / fake / masked fake / real) and a score-map
    heatmap with the proposed region rectangle, for inspection."""
    out_dir = Path(out_dir)
    k = min(config.max_samples, len(X))
    x, y = X[:k], Y[:k]
    state.eval_mode()
    with torch.no_grad():
        fake = state.generator(x)
        maps = state.patch_d(x, fake)
    regions = propose_batch(maps, geometry)
    y_mask = composite(y, fake, regions).masked_fake
    state.train_mode()

    grid = torch.cat([x, fake, y_mask, y])
    samples = out_dir / "samples"
    samples.mkdir(parents=True, exist_ok=True)
    save_image(grid, samples / f"epoch_{epoch:04d}.png", nrow=k,
               normalize=True, value_range=(-1, 1))

    heatmaps = out_dir / "heatmaps"
    heatmaps.mkdir(parents=True, exist_ok=True)
    save_heatmap(maps[0, 0].numpy(), regions[0], config.image_size,
                 heatmaps / f"epoch_{epoch:04d}.png")


def save_heatmap(score_map: np.ndarray, region: Region, image_size: int, path):
    """Render a score map as grayscale (dark = fake), upscaled to image size,
    with the proposed region outlined in red."""
    gray = np.clip(score_map * 255.0, 0, 255).astype(np.uint8)
    img = Image.fromarray(gray, mode="L").resize((image_size, image_size), Image.NEAREST)
    img = img.convert("RGB")
    draw = ImageDraw.Draw(img)
    draw.rectangle((region.x0, region.y0, region.x1 - 1, region.y1 - 1),
                   outline=(255, 0, 0))
    img.save(path)


def evaluate(generator: ResnetGenerator, dataset, metric_names=("psnr", "ssim"),
             out_path=None, batch_size: int = 8, peak: float = 2.0):
    """Mean PSNR/SSIM of generated outputs against targets over a dataset.

    Returns a list of :class:`MetricResult`; with ``out_path`` also writes the
    per-sample table plus a summary row as CSV.
    """
    known = {"psnr": lambda a, b: psnr(a, b, peak), "ssim": lambda a, b: ssim(a, b, peak)}
    for name in metric_names:
        if name not in known:
            raise ValueError(f"unknown metric {name!r}")
    X, Y = dataset.tensors()
    was_training = generator.training
    generator.eval()
    per = {name: [] for name in metric_names}
    with torch.no_grad():
        for start in range(0, len(X), batch_size):
            fake = generator(X[start:start + batch_size])
            target = Y[start:start + batch_size]
            for i in range(len(fake)):
                a, b = fake[i].numpy(), target[i].numpy()
                for name in metric_names:
                    per[name].append(known[name](a, b))
    if was_training:
        generator.train()
    results = [
        MetricResult(name=name, per_sample=tuple(per[name]),
                     mean=float(np.mean(per[name])))
        for name in metric_names
    ]
    if out_path:
        write_metric_table(out_path, dataset.identifiers, results)
    return results


def _optimizer_blobs(prefix: str, optimizer) -> tuple[dict, dict]:
    sd = optimizer.state_dict()
    blobs = {}
    for pid, entry in sd["state"].items():
        for key, value in entry.items():
            blobs[f"{prefix}/state/{pid}/{key}"] = (
                value.detach().cpu().numpy() if torch.is_tensor(value)
                else np.asarray(value)
            )
    return {"param_groups": sd["param_groups"]}, blobs


def save_state(path, state: TrainState, config: TrainConfig):
    """Serialize the full training state to the deterministic binary format."""
    mapping = config_to_mapping(config)
    meta = {
        "step": state.step,
        "epoch": state.epoch,
        "config": mapping,
        "config_hash": config_hash(mapping),
        "arch_hash": config_hash(architecture_mapping(config)),
        "optim": {},
    }
    blobs: dict[str, np.ndarray] = {}
    for tag, net in state.networks().items():
        for name, tensor in net.state_dict().items():
            blobs[f"{tag}/{name}"] = tensor.detach().cpu().numpy()
    for tag, opt in state.optimizers().items():
        groups, opt_blobs = _optimizer_blobs(f"opt_{tag}", opt)
        meta["optim"][tag] = groups
        blobs.update(opt_blobs)
    blobs["rng/noise"] = state.noise_rng.get_state().numpy()
    blobs["history/scoremap_epoch_means"] = np.asarray(
        state.scoremap_epoch_means, dtype=np.float64
    )
    write_blobs(path, meta, blobs)


def load_state(path) -> tuple[TrainState, TrainConfig]:
    """Rebuild a TrainState (and its config) from a checkpoint file."""
    from .config import KEYMAP  # local import to avoid a cycle at module load

    meta, blobs = read_blobs(path)
    mapping = meta["config"]
    cfg = TrainConfig(**{KEYMAP[k]: v for k, v in mapping.items()})
    state = build_state(cfg)

    for tag, net in state.networks().items():
        sd = {}
        for name, tensor in net.state_dict().items():
            arr = blobs[f"{tag}/{name}"]
            sd[name] = torch.from_numpy(arr.copy()).to(tensor.dtype)
        net.load_state_dict(sd)

    for tag, opt in state.optimizers().items():
        prefix = f"opt_{tag}/state/"
        entries: dict[int, dict] = {}
        for name, arr in blobs.items():
            if not name.startswith(prefix):
                continue
            _, _, pid, key = name.split("/")
            entries.setdefault(int(pid), {})[key] = torch.from_numpy(arr.copy())
        opt.load_state_dict({
            "state": entries,
            "param_groups": meta["optim"][tag]["param_groups"],
        })

    state.noise_rng.set_state(torch.from_numpy(blobs["rng/noise"].copy()))
    state.step = meta["step"]
    state.epoch = meta["epoch"]
    state.scoremap_epoch_means = list(blobs["history/scoremap_epoch_means"])
    return state, cfg

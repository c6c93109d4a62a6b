"""The three networks: resnet generator, patch critic, and global reviser.

The patch critic uses unpadded 4x4 convolutions so every score-map cell is a
pure function of exactly one receptive-field patch (70x70 at the default
depth): the map is equivalent to sliding that patch across the image with the
cumulative stride.  The reviser is a DCGAN-style strided stack collapsing the
conditional pair to a single probability.
"""

from __future__ import annotations

import torch
import torch.nn as nn

__all__ = [
    "ResnetGenerator",
    "PatchDiscriminator",
    "Reviser",
    "init_weights",
    "conv_output_size",
    "stack_output_size",
    "stack_receptive_field",
    "patch_critic_layers",
    "max_strided_stages",
]


def conv_output_size(size: int, kernel: int, stride: int, padding: int = 0) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def stack_output_size(size: int, layers) -> int:
    """Output side after a stack of (kernel, stride, padding) conv layers."""
    for kernel, stride, padding in layers:
        size = conv_output_size(size, kernel, stride, padding)
        if size < 1:
            raise ValueError("input too small for this layer stack")
    return size


def stack_receptive_field(layers) -> int:
    """Receptive field of one output unit, by the standard recurrence."""
    rf, jump = 1, 1
    for kernel, stride, _ in layers:
        rf += (kernel - 1) * jump
        jump *= stride
    return rf


def patch_critic_layers(n_strided: int = 3):
    """(kernel, stride, padding) list of the patch critic: unpadded 4x4 convs,
    ``n_strided`` stride-2 stages, one stride-1 stage, and the 1-channel head."""
    return [(4, 2, 0)] * n_strided + [(4, 1, 0), (4, 1, 0)]


def max_strided_stages(image_size: int, cap: int = 3) -> int:
    """Deepest patch critic (up to ``cap`` stride-2 stages) whose receptive
    field fits the image and whose score map keeps at least 2x2 cells."""
    for n in range(cap, 0, -1):
        layers = patch_critic_layers(n)
        if stack_receptive_field(layers) > image_size:
            continue
        try:
            if stack_output_size(image_size, layers) >= 2:
                return n
        except ValueError:
            continue
    raise ValueError(f"image size {image_size} is too small for any patch critic")


def init_weights(module: nn.Module, generator: torch.Generator | None = None):
    """DCGAN-convention init: conv weights N(0, 0.02), norm weights N(1, 0.02)."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, 0.02, generator=generator)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.normal_(m.weight, 1.0, 0.02, generator=generator)
            nn.init.zeros_(m.bias)


class ResidualBlock(nn.Module):
    """Two 3x3 convs with batch norm; optional seeded dropout acts as the
    generator's noise source."""

    def __init__(self, channels: int, dropout: float = 0.5):
        super().__init__()
        self.dropout = dropout
        self.block1 = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            nn.BatchNorm2d(channels),
            nn.ReLU(True),
        )
        self.block2 = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            nn.BatchNorm2d(channels),
        )

    def forward(self, x, noise_generator: torch.Generator | None = None):
        h = self.block1(x)
        if self.training and self.dropout > 0:
            if noise_generator is None:
                mask = torch.rand_like(h)
            else:
                mask = torch.rand(
                    h.shape, generator=noise_generator, dtype=h.dtype, device=h.device
                )
            h = h * (mask >= self.dropout) / (1.0 - self.dropout)
        return x + self.block2(h)


class ResnetGenerator(nn.Module):
    """Encoder / residual-body / decoder generator.

    Two stride-2 downsampling stages, ``n_blocks`` residual blocks at the
    bottleneck, two fractional-stride upsampling stages, tanh output.  Spatial
    size is preserved; inputs must be divisible by 4.
    """

    def __init__(self, in_channels=3, out_channels=3, base_width=64, n_blocks=9,
                 dropout=0.5):
        super().__init__()
        w = base_width
        self.head = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(in_channels, w, 7),
            nn.BatchNorm2d(w),
            nn.ReLU(True),
            nn.Conv2d(w, w * 2, 3, stride=2, padding=1),
            nn.BatchNorm2d(w * 2),
            nn.ReLU(True),
            nn.Conv2d(w * 2, w * 4, 3, stride=2, padding=1),
            nn.BatchNorm2d(w * 4),
            nn.ReLU(True),
        )
        self.blocks = nn.ModuleList(
            [ResidualBlock(w * 4, dropout) for _ in range(n_blocks)]
        )
        self.tail = nn.Sequential(
            nn.ConvTranspose2d(w * 4, w * 2, 3, stride=2, padding=1, output_padding=1),
            nn.BatchNorm2d(w * 2),
            nn.ReLU(True),
            nn.ConvTranspose2d(w * 2, w, 3, stride=2, padding=1, output_padding=1),
            nn.BatchNorm2d(w),
            nn.ReLU(True),
            nn.ReflectionPad2d(3),
            nn.Conv2d(w, out_channels, 7),
            nn.Tanh(),
        )

    def forward(self, x, noise_generator: torch.Generator | None = None):
        if x.shape[-1] % 4 or x.shape[-2] % 4:
            raise ValueError(
                f"generator input size {tuple(x.shape[-2:])} must be divisible by 4"
            )
        h = self.head(x)
        for block in self.blocks:
            h = block(h, noise_generator)
        return self.tail(h)


class PatchDiscriminator(nn.Module):
    """Conditional patch critic emitting a score map of per-patch probabilities.

    All convolutions are 4x4 and unpadded; the default three stride-2 stages
    plus two stride-1 stages give a 70x70 receptive field, so a 70x70 input
    collapses to a single cell.  Channel widths double per stage from
    ``base_width`` (capped at 8x).  No norm on the first layer, sigmoid head.
    """

    def __init__(self, in_channels=6, base_width=64, n_strided=3):
        super().__init__()
        if n_strided < 1:
            raise ValueError("patch critic needs at least one strided stage")
        self.geometry = patch_critic_layers(n_strided)
        self.receptive_field = stack_receptive_field(self.geometry)

        widths = [min(base_width * 2 ** i, base_width * 8) for i in range(n_strided + 1)]
        layers = [nn.Conv2d(in_channels, widths[0], 4, 2), nn.LeakyReLU(0.2, True)]
        for i in range(1, n_strided):
            layers += [
                nn.Conv2d(widths[i - 1], widths[i], 4, 2),
                nn.BatchNorm2d(widths[i]),
                nn.LeakyReLU(0.2, True),
            ]
        layers += [
            nn.Conv2d(widths[n_strided - 1], widths[n_strided], 4, 1),
            nn.BatchNorm2d(widths[n_strided]),
            nn.LeakyReLU(0.2, True),
            nn.Conv2d(widths[n_strided], 1, 4, 1),
            nn.Sigmoid(),
        ]
        self.net = nn.Sequential(*layers)

    def scoremap_size(self, image_size: int) -> int:
        return stack_output_size(image_size, self.geometry)

    def forward(self, condition, candidate):
        if condition.shape[-2:] != candidate.shape[-2:]:
            raise ValueError(
                f"condition and candidate spatial sizes differ: "
                f"{tuple(condition.shape[-2:])} vs {tuple(candidate.shape[-2:])}"
            )
        if min(condition.shape[-2:]) < self.receptive_field:
            raise ValueError(
                f"input {tuple(condition.shape[-2:])} is smaller than the critic's "
                f"{self.receptive_field}x{self.receptive_field} receptive field"
            )
        return self.net(torch.cat([condition, candidate], dim=1))


class Reviser(nn.Module):
    """Global conditional discriminator: strided 4x4 stages halve the input
    until it is small, then a full-kernel head reduces it to one probability
    per sample.  Depth therefore grows by one stage per doubling of the
    training resolution."""

    def __init__(self, in_channels=6, base_width=64, image_size=64):
        super().__init__()
        self.image_size = image_size
        layers = []
        size, width = image_size, in_channels
        first = True
        while size > 6:
            out = base_width if first else min(width * 2, base_width * 8)
            layers.append(nn.Conv2d(width, out, 4, 2, 1))
            if not first:
                layers.append(nn.BatchNorm2d(out))
            layers.append(nn.LeakyReLU(0.2, True))
            width, size, first = out, size // 2, False
        layers += [nn.Conv2d(width, 1, size), nn.Sigmoid()]
        self.net = nn.Sequential(*layers)

    def forward(self, condition, candidate):
        pair = torch.cat([condition, candidate], dim=1)
        if pair.shape[-2:] != (self.image_size, self.image_size):
            raise ValueError(
                f"reviser built for {self.image_size}x{self.image_size} inputs, "
                f"got {tuple(pair.shape[-2:])}"
            )
        return self.net(pair).reshape(len(pair))

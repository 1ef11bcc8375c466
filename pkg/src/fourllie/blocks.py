"""Learnable building blocks: frequency-processing and spatial-processing.

An FP block edits features in the frequency domain (global receptive field:
every output pixel depends on every input pixel), an SP block edits them with
small spatial convolutions (local receptive field, 5x5 for the stacked pair).
Both are residual, so a zero-initialized block is an exact identity.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from .errors import InvalidInputError
from .fourier import recombine_image

__all__ = ["FPBlock", "SPBlock", "block_param_count", "kaiming_init_", "zero_init_", "LEAKY_SLOPE"]

LEAKY_SLOPE = 0.1


class FPBlock(nn.Module):
    """Frequency processing block.

    Forward path: per-channel unitary 2-D DFT; split into amplitude and
    phase; each goes through two 1x1 convolutions with one LeakyReLU between
    them; recombine and inverse-transform back (real part); one 3x3
    convolution; add the block input. The 1x1 convolutions act on the raw
    (non-centered) frequency grids, mixing channels per frequency bin.
    """

    def __init__(self, nc: int):
        super().__init__()
        self.amp_branch = nn.Sequential(
            nn.Conv2d(nc, nc, 1),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Conv2d(nc, nc, 1),
        )
        self.pha_branch = nn.Sequential(
            nn.Conv2d(nc, nc, 1),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Conv2d(nc, nc, 1),
        )
        self.spatial_conv = nn.Conv2d(nc, nc, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        spec = torch.fft.fft2(x, norm="ortho")
        amp = self.amp_branch(torch.abs(spec))
        pha = self.pha_branch(torch.angle(spec))
        y = recombine_image(amp, pha)
        return x + self.spatial_conv(y)


class SPBlock(nn.Module):
    """Spatial processing block: conv3x3 -> LeakyReLU -> conv3x3 -> residual."""

    def __init__(self, nc: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(nc, nc, 3, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
            nn.Conv2d(nc, nc, 3, padding=1),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


def block_param_count(block_type: str, nc: int) -> int:
    """Exact learnable-scalar count of one block at width nc."""
    if nc < 1:
        raise InvalidInputError(f"nc must be >= 1, got {nc}")
    if block_type == "fp":
        # two 1x1-conv pairs (amplitude + phase branches) plus one 3x3 conv
        return 2 * (2 * (nc * nc + nc)) + (9 * nc * nc + nc)
    if block_type == "sp":
        # two 3x3 convs
        return 2 * (9 * nc * nc + nc)
    raise InvalidInputError(f"unknown block type {block_type!r} (expected 'fp' or 'sp')")


def kaiming_init_(module: nn.Module, generator: torch.Generator) -> None:
    """Fan-in-scaled normal init for every conv, zero biases.

    Uses an explicit generator so that model construction never touches the
    global RNG: same seed, same architecture -> bitwise-identical parameters.
    """
    gain = math.sqrt(2.0 / (1.0 + LEAKY_SLOPE**2))
    for _, m in module.named_modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            with torch.no_grad():
                m.weight.normal_(0.0, gain / math.sqrt(fan_in), generator=generator)
                if m.bias is not None:
                    m.bias.zero_()


def zero_init_(module: nn.Module) -> None:
    """Zero every parameter (residual blocks then behave as identities)."""
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()

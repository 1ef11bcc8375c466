"""Training objectives.

Three terms: an amplitude-spectrum loss supervising the frequency stage, a
pixel + perceptual loss supervising the spatial stage, and their weighted
total. Every norm in this package is realized as a *mean* of squared
differences so the weights stay resolution-independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import kaiming_init_
from .checkpoint import read_container, write_container
from .errors import InvalidConfigError, InvalidInputError

__all__ = [
    "LossWeights",
    "loss_s1",
    "loss_s2",
    "total_loss",
    "TinyFeatureExtractor",
    "Vgg19FeatureExtractor",
    "save_extractor",
    "load_extractor",
    "default_extractor",
]


@dataclass
class LossWeights:
    """alpha weights the perceptual term inside the spatial loss; lambda_
    weights the frequency-stage amplitude loss inside the total."""

    alpha: float = 0.1
    lambda_: float = 0.01

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.lambda_ < 0:
            raise InvalidConfigError(f"loss weights must be >= 0, got {self}")


def _check_shapes(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def loss_s1(output_s1: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean squared error between the amplitude spectra of the two images.

    Amplitude is translation-invariant, so this supervises the brightness
    distribution without penalizing (circular) spatial shifts.
    """
    _check_shapes(output_s1, gt)
    amp_out = torch.abs(torch.fft.fft2(output_s1, norm="ortho"))
    amp_gt = torch.abs(torch.fft.fft2(gt, norm="ortho"))
    return F.mse_loss(amp_out, amp_gt)


def loss_s2(
    output_s2: torch.Tensor,
    gt: torch.Tensor,
    phi: nn.Module | None,
    alpha: float = 0.1,
) -> torch.Tensor:
    """Pixel MSE plus alpha times feature-space MSE under the frozen net phi.

    phi is mandatory: dropping the perceptual term is an explicit ablation
    decision made by the caller, never a silent fallback.
    """
    _check_shapes(output_s2, gt)
    if phi is None:
        raise InvalidInputError("perceptual extractor is required (drop the term explicitly instead)")
    pixel = F.mse_loss(output_s2, gt)
    if alpha == 0:
        return pixel
    return pixel + alpha * F.mse_loss(phi(output_s2), phi(gt))


def total_loss(
    output_s1: torch.Tensor,
    output_s2: torch.Tensor,
    gt: torch.Tensor,
    phi: nn.Module | None,
    weights: LossWeights = LossWeights(),
) -> torch.Tensor:
    """loss_s2 + lambda_ * loss_s1."""
    return loss_s2(output_s2, gt, phi, weights.alpha) + weights.lambda_ * loss_s1(output_s1, gt)


class _FrozenFeatureNet(nn.Module):
    """Shared behavior for the perceptual feature extractors.

    Inputs are normalized with the recorded per-channel statistics, then run
    through a frozen conv stack; the activation tapped is named in `tap`.
    Parameters never receive gradients and never join an optimizer.
    """

    arch: str = ""
    tap: str = ""
    pretrained: bool = False

    def __init__(self, body: nn.Sequential, mean: tuple[float, ...], std: tuple[float, ...]):
        super().__init__()
        self.body = body
        self.register_buffer("mean", torch.tensor(mean).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(std).view(1, 3, 1, 1))
        self.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True) -> "_FrozenFeatureNet":
        # Frozen: ignore train() so downstream .train() calls cannot
        # accidentally flip any future stateful layers.
        return super().train(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeeze = x.dim() == 3
        if squeeze:
            x = x.unsqueeze(0)
        x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        y = self.body(x)
        return y.squeeze(0) if squeeze else y


class TinyFeatureExtractor(_FrozenFeatureNet):
    """Small seeded random conv stack used as an offline stand-in.

    NOT pretrained: its features are random (but fixed) projections, good
    enough for smoke training and for exercising the perceptual-loss code
    path without any weight download.
    """

    arch = "tiny"
    tap = "relu3"
    pretrained = False

    def __init__(self, seed: int = 0):
        body = nn.Sequential(
            nn.Conv2d(3, 8, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(8, 16, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
        )
        kaiming_init_(body, torch.Generator().manual_seed(seed))
        super().__init__(body, mean=(0.5, 0.5, 0.5), std=(0.5, 0.5, 0.5))


# Conv widths of the 19-layer VGG classifier up to its mid-depth relu3_4 tap.
_VGG19_PREFIX = (64, 64, "pool", 128, 128, "pool", 256, 256, 256, 256)
_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class Vgg19FeatureExtractor(_FrozenFeatureNet):
    """Mid-depth feature tap of a 19-layer VGG classifier.

    Weights come from a container file (see `load_extractor`); construction
    without a file leaves random weights and pretrained=False.
    """

    arch = "vgg19_relu3_4"
    tap = "relu3_4"

    def __init__(self, seed: int = 0):
        layers: list[nn.Module] = []
        in_ch = 3
        for spec_entry in _VGG19_PREFIX:
            if spec_entry == "pool":
                layers.append(nn.MaxPool2d(2))
            else:
                layers.append(nn.Conv2d(in_ch, spec_entry, 3, padding=1))
                layers.append(nn.ReLU(inplace=True))
                in_ch = spec_entry
        body = nn.Sequential(*layers)
        kaiming_init_(body, torch.Generator().manual_seed(seed))
        super().__init__(body, mean=_IMAGENET_MEAN, std=_IMAGENET_STD)


_ARCHS = {TinyFeatureExtractor.arch: TinyFeatureExtractor, Vgg19FeatureExtractor.arch: Vgg19FeatureExtractor}


def save_extractor(extractor: _FrozenFeatureNet, path: str | Path, pretrained: bool = True) -> None:
    """Write extractor weights to a container file tagged with its arch."""
    arrays = {k: v for k, v in extractor.state_dict().items()}
    write_container(path, arrays, meta={"extractor_arch": extractor.arch, "pretrained": pretrained})


def load_extractor(path: str | Path) -> _FrozenFeatureNet:
    """Load a perceptual extractor from a weight file."""
    container = read_container(path)
    arch = container.meta.get("extractor_arch")
    if arch not in _ARCHS:
        raise InvalidConfigError(f"unknown extractor arch {arch!r} in {path}")
    extractor = _ARCHS[arch]()
    state = extractor.state_dict()
    for name in state:
        if name not in container.arrays:
            raise InvalidConfigError(f"extractor file {path} is missing array {name!r}")
        state[name] = torch.from_numpy(container.arrays[name].copy()).to(state[name].dtype)
    extractor.load_state_dict(state)
    extractor.pretrained = bool(container.meta.get("pretrained", False))
    return extractor


def default_extractor(seed: int = 0) -> TinyFeatureExtractor:
    """The stand-in extractor used when no weight file is configured."""
    return TinyFeatureExtractor(seed=seed)

"""Standalone frequency-domain experiments.

Two image-level probes demonstrate that amplitude carries lightness: swapping
the amplitude components of a dark/bright pair swaps their apparent
brightness, and scaling a dark image's amplitude by a constant k > 1
brightens it while the phase (structure) is untouched. A third experiment
compares three ways of predicting an enhanced amplitude with a shared FP
trunk: (1) predict an additive amplitude residual, (2) predict the enhanced
image directly in the spatial domain, (3) predict a multiplicative transform
map in (0,1) that the input amplitude is divided by.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .blocks import SPBlock, kaiming_init_
from .data import DatasetManifest, augment, load_pair
from .errors import InvalidInputError
from .fourier import recombine_image
from .losses import loss_s1
from .model import S1_CLAMP_MAX, FPTrunk, FrequencyStage

__all__ = [
    "mean_luminance",
    "amplitude_swap",
    "amplitude_scale",
    "AppendixVariant",
    "make_appendix_variant",
    "appendix_a_variant",
    "train_appendix_variant",
    "compare_appendix_settings",
]

_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def mean_luminance(img: torch.Tensor) -> float:
    """Mean BT.601 luminance of a (3, H, W) or (B, 3, H, W) image."""
    w = img.new_tensor(_LUMA_WEIGHTS).view(3, 1, 1)
    if img.dim() == 4:
        w = w.unsqueeze(0)
    return float((img * w).sum(dim=-3).mean())


def amplitude_swap(
    low: torch.Tensor, normal: torch.Tensor, clamp: bool = True
) -> tuple[torch.Tensor, torch.Tensor]:
    """Exchange the amplitude spectra of two same-shape images.

    Returns (amp_low + phase_normal, amp_normal + phase_low). Each output's
    amplitude equals its source amplitude exactly before the final [0,1]
    clamp; pass clamp=False for spectral assertions.
    """
    if low.shape != normal.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(low.shape)} vs {tuple(normal.shape)}")
    spec_low = torch.fft.fft2(low, norm="ortho")
    spec_normal = torch.fft.fft2(normal, norm="ortho")
    amp_l_pha_n = recombine_image(torch.abs(spec_low), torch.angle(spec_normal))
    amp_n_pha_l = recombine_image(torch.abs(spec_normal), torch.angle(spec_low))
    if clamp:
        amp_l_pha_n = amp_l_pha_n.clamp(0.0, 1.0)
        amp_n_pha_l = amp_n_pha_l.clamp(0.0, 1.0)
    return amp_l_pha_n, amp_n_pha_l


def amplitude_scale(img: torch.Tensor, k: float, clamp: bool = True) -> torch.Tensor:
    """Multiply the image's amplitude spectrum by k > 0, keeping the phase.

    By linearity this equals k * img before the [0,1] clamp, so any k > 1
    strictly brightens (until clamping saturates).
    """
    if k <= 0:
        raise InvalidInputError(f"scale factor must be > 0, got {k}")
    spec = torch.fft.fft2(img, norm="ortho")
    out = recombine_image(k * torch.abs(spec), torch.angle(spec))
    return out.clamp(0.0, 1.0) if clamp else out


class AppendixVariant(nn.Module):
    """One of the three amplitude-prediction strategies over a shared trunk.

    setting 1: the head emits an additive amplitude residual,
               A_out = A_in + residual.
    setting 2: the head emits a spatial residual added to the input image;
               a single SP block runs in parallel with the FP trunk and is
               summed into the head input (the direct image prediction
               otherwise converges poorly).
    setting 3: the transform-map strategy; identical to the frequency stage.

    All heads are zero-initialized. Settings 1 and 2 then start as exact
    identities; setting 3 starts from the uniform map 0.5, i.e. a plain 2x
    amplitude boost (a sigmoid head cannot start at map 1).
    """

    def __init__(self, setting: int, nc: int = 8, n_blocks: int = 6, seed: int = 0):
        super().__init__()
        if setting not in (1, 2, 3):
            raise InvalidInputError(f"setting must be 1, 2 or 3, got {setting}")
        self.setting = setting
        gen = torch.Generator().manual_seed(seed)
        if setting == 3:
            self.stage = FrequencyStage(nc, n_blocks)
            kaiming_init_(self.stage, gen)
            head = self.stage.head
        else:
            self.trunk = FPTrunk(nc, n_blocks)
            self.head = nn.Conv2d(nc, 3, 3, padding=1)
            if setting == 2:
                self.parallel_sp = SPBlock(nc)
            kaiming_init_(self, gen)
            head = self.head
        with torch.no_grad():
            head.weight.zero_()
            head.bias.zero_()

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        squeeze = img.dim() == 3
        x = img.unsqueeze(0) if squeeze else img
        if self.setting == 3:
            out, _, _ = self.stage(x)
        elif self.setting == 1:
            residual = self.head(self.trunk(x))
            spec = torch.fft.fft2(x, norm="ortho")
            out = recombine_image(torch.abs(spec) + residual, torch.angle(spec))
            out = out.clamp(0.0, S1_CLAMP_MAX)
        else:
            feats = self.trunk(x) + self.parallel_sp(self.trunk.stem(x))
            out = (x + self.head(feats)).clamp(0.0, S1_CLAMP_MAX)
        return out.squeeze(0) if squeeze else out


def make_appendix_variant(setting: int, nc: int = 8, n_blocks: int = 6, seed: int = 0) -> AppendixVariant:
    return AppendixVariant(setting, nc, n_blocks, seed)


def appendix_a_variant(setting: int, img: torch.Tensor, variant: AppendixVariant) -> torch.Tensor:
    """Run one prediction variant on an image (checked against its setting)."""
    if variant.setting != setting:
        raise InvalidInputError(f"variant was built for setting {variant.setting}, not {setting}")
    with torch.no_grad():
        return variant(img)


def _dataset_amplitude_error(variant: AppendixVariant, manifest: DatasetManifest) -> float:
    errs = []
    with torch.no_grad():
        for record in sorted(manifest.records, key=lambda r: r.id):
            pair = load_pair(record)
            errs.append(float(loss_s1(variant(pair.low), pair.normal)))
    return sum(errs) / len(errs)


def train_appendix_variant(
    setting: int,
    manifest: DatasetManifest,
    iters: int = 2000,
    nc: int = 8,
    batch_size: int = 4,
    crop: int = 64,
    lr: float = 4.0e-4,
    seed: int = 0,
) -> tuple[AppendixVariant, float]:
    """Overfit one variant on the manifest under the amplitude-error objective.

    The three settings are meant to be trained with identical protocols and
    identical trunk initialization (same seed), so the only difference is
    the prediction target. Returns (trained variant, final mean amplitude
    error over the manifest at full resolution).
    """
    variant = AppendixVariant(setting, nc=nc, seed=seed)
    optimizer = torch.optim.Adam(variant.parameters(), lr=lr)
    variant.train()
    for iteration in range(1, iters + 1):
        rng = np.random.default_rng([seed, iteration])
        idxs = rng.integers(0, len(manifest.records), size=batch_size)
        lows, normals = [], []
        for idx in idxs:
            pair = augment(load_pair(manifest.records[int(idx)]), crop, rng)
            lows.append(pair.low)
            normals.append(pair.normal)
        low, normal = torch.stack(lows), torch.stack(normals)
        loss = loss_s1(variant(low), normal)
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
    variant.eval()
    return variant, _dataset_amplitude_error(variant, manifest)


def compare_appendix_settings(
    manifest: DatasetManifest,
    iters: int = 2000,
    nc: int = 8,
    batch_size: int = 4,
    crop: int = 64,
    lr: float = 4.0e-4,
    seed: int = 0,
) -> dict[int, float]:
    """Train settings 1/2/3 identically; returns final amplitude errors."""
    return {
        setting: train_appendix_variant(
            setting, manifest, iters=iters, nc=nc, batch_size=batch_size, crop=crop, lr=lr, seed=seed
        )[1]
        for setting in (1, 2, 3)
    }

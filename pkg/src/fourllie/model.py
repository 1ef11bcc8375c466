"""The full two-stage enhancement network.

Stage 1 (frequency): six residual FP blocks with symmetric additive skips
estimate a per-bin amplitude transform map M in (0,1); dividing the input's
amplitude spectrum by (M + eps) enlarges it, which brightens the image while
the phase (structure) is kept. Stage 2 (spatial): an encoder/decoder whose
bottleneck runs a global frequency branch and a local spatial branch in
parallel, blended per pixel by the SNR prior map, to denoise and recover
detail. Ablation flags can disable either stage or replace the SNR blend by
concatenation fusion; an exposure-correction mode emits a second map so
amplitude can also be shrunk.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import FPBlock, SPBlock, kaiming_init_
from .checkpoint import Container, read_container, write_container
from .errors import ConfigMismatchError, CorruptCheckpointError, InvalidConfigError, InvalidInputError
from .snr import compute_snr_map, resize_map

__all__ = [
    "ModelConfig",
    "StageOutputs",
    "FPTrunk",
    "FrequencyStage",
    "SpatialStage",
    "FourLLIE",
    "apply_amplitude_map",
    "apply_exposure_maps",
    "build_model",
    "count_parameters",
    "save_checkpoint",
    "load_checkpoint",
    "config_fingerprint",
    "EPS_AMPLITUDE",
    "S1_CLAMP_MAX",
]

# Division guard in the amplitude transform; also the smallest possible
# divisor together with the sigmoid map, so amplitude never blows up.
EPS_AMPLITUDE = 1e-8

# The frequency stage may legitimately overshoot [0,1]; the spatial stage is
# expected to see (and fix) the overshoot, so stage 1 clamps only at 1.5.
S1_CLAMP_MAX = 1.5

# Two stride-2 downsamplings in the spatial stage.
_SPATIAL_MULTIPLE = 4


@dataclass
class ModelConfig:
    """Architecture widths and structural ablation switches.

    `enc_widths` are the three encoder/decoder channel widths; when omitted
    they derive from `nc` as (nc, 3*nc//2, 2*nc), which at the default
    nc=16 puts the total parameter count at ~0.14M (~0.02M frequency stage,
    ~0.12M spatial stage).
    """

    nc: int = 16
    n_fp_stage1: int = 6
    enc_widths: tuple[int, int, int] | None = None
    use_frequency_stage: bool = True
    use_spatial_stage: bool = True
    use_snr_fusion: bool = True
    exposure_correction_mode: bool = False

    def __post_init__(self) -> None:
        if self.nc < 1:
            raise InvalidConfigError(f"nc must be >= 1, got {self.nc}")
        if self.n_fp_stage1 < 1:
            raise InvalidConfigError(f"n_fp_stage1 must be >= 1, got {self.n_fp_stage1}")
        if not (self.use_frequency_stage or self.use_spatial_stage):
            raise InvalidConfigError("at least one of the two stages must be enabled")
        if self.enc_widths is not None:
            self.enc_widths = tuple(int(w) for w in self.enc_widths)
            if len(self.enc_widths) != 3 or any(w < 1 for w in self.enc_widths):
                raise InvalidConfigError(f"enc_widths must be three positive ints, got {self.enc_widths}")

    @property
    def widths(self) -> tuple[int, int, int]:
        if self.enc_widths is not None:
            return self.enc_widths
        return (self.nc, (3 * self.nc) // 2, 2 * self.nc)

    def to_dict(self) -> dict[str, Any]:
        return {
            "nc": self.nc,
            "n_fp_stage1": self.n_fp_stage1,
            "enc_widths": list(self.widths),
            "use_frequency_stage": self.use_frequency_stage,
            "use_spatial_stage": self.use_spatial_stage,
            "use_snr_fusion": self.use_snr_fusion,
            "exposure_correction_mode": self.exposure_correction_mode,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfigError(f"unknown model config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if kwargs.get("enc_widths") is not None:
            kwargs["enc_widths"] = tuple(kwargs["enc_widths"])
        return cls(**kwargs)


def config_fingerprint(config: ModelConfig) -> str:
    """Stable hash of a config, used to stamp eval reports."""
    blob = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass
class StageOutputs:
    """Everything one enhancement pass produces."""

    output_s1: torch.Tensor
    output_s2: torch.Tensor
    map: torch.Tensor | None = None
    map_down: torch.Tensor | None = None
    snr: torch.Tensor | None = None


def apply_amplitude_map(img: torch.Tensor, amp_map: torch.Tensor, eps: float = EPS_AMPLITUDE) -> torch.Tensor:
    """Divide the image's amplitude spectrum by (map + eps), keep its phase.

    Pure algebra, no clamping: a constant map m returns img/(m + eps)
    exactly, by linearity of the transform.
    """
    spec = torch.fft.fft2(img, norm="ortho")
    amp, pha = torch.abs(spec), torch.angle(spec)
    out = amp / (amp_map + eps)
    return torch.fft.ifft2(torch.complex(out * torch.cos(pha), out * torch.sin(pha)), norm="ortho").real


def apply_exposure_maps(
    img: torch.Tensor,
    map_up: torch.Tensor,
    map_down: torch.Tensor,
    eps: float = EPS_AMPLITUDE,
) -> torch.Tensor:
    """Two-map amplitude transform: scale by map_down / (map_up + eps).

    map_up < 1 enlarges amplitude (brightens), map_down < 1 shrinks it
    (darkens), so the network can correct both under- and over-exposure.
    """
    spec = torch.fft.fft2(img, norm="ortho")
    amp, pha = torch.abs(spec), torch.angle(spec)
    out = amp * map_down / (map_up + eps)
    return torch.fft.ifft2(torch.complex(out * torch.cos(pha), out * torch.sin(pha)), norm="ortho").real


class FPTrunk(nn.Module):
    """Stem conv into a chain of FP blocks with symmetric additive skips.

    The output of block i is added to the output of block n+1-i (1<->n,
    2<->n-1, ...), the standard symmetric pairing. Shared by the frequency
    stage and by the diagnostic amplitude-prediction variants so that
    comparisons isolate the prediction target, not the backbone.
    """

    def __init__(self, nc: int, n_blocks: int = 6):
        super().__init__()
        self.stem = nn.Conv2d(3, nc, 3, padding=1)
        self.blocks = nn.ModuleList(FPBlock(nc) for _ in range(n_blocks))

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        x = self.stem(img)
        saved: dict[int, torch.Tensor] = {}
        n = len(self.blocks)
        for i, blk in enumerate(self.blocks):
            x = blk(x)
            partner = n - 1 - i
            if i < partner:
                saved[i] = x
            elif i > partner:
                x = x + saved[partner]
        return x


class FrequencyStage(nn.Module):
    """Amplitude-transform-map estimator plus the map application.

    A 3x3 head conv over the trunk features plus a sigmoid gives one map
    value in (0,1) per color channel and frequency bin. In exposure mode the
    head emits two maps (brighten and darken).
    """

    def __init__(self, nc: int, n_blocks: int = 6, exposure_mode: bool = False):
        super().__init__()
        self.exposure_mode = exposure_mode
        self.trunk = FPTrunk(nc, n_blocks)
        self.head = nn.Conv2d(nc, 6 if exposure_mode else 3, 3, padding=1)

    def predict_maps(self, img: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor | None]:
        m = torch.sigmoid(self.head(self.trunk(img)))
        if self.exposure_mode:
            return m[:, :3], m[:, 3:]
        return m, None

    def forward(
        self,
        img: torch.Tensor,
        forced_map: torch.Tensor | float | None = None,
        forced_map_down: torch.Tensor | float | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor | None]:
        """Returns (output_s1 clamped to [0, 1.5], map, map_down or None)."""
        if forced_map is not None:
            m = torch.broadcast_to(torch.as_tensor(forced_map, dtype=img.dtype, device=img.device), img.shape)
            m_down = None
            if self.exposure_mode:
                down = 1.0 if forced_map_down is None else forced_map_down
                m_down = torch.broadcast_to(torch.as_tensor(down, dtype=img.dtype, device=img.device), img.shape)
        else:
            m, m_down = self.predict_maps(img)
        if self.exposure_mode:
            out = apply_exposure_maps(img, m, m_down)
        else:
            out = apply_amplitude_map(img, m)
        return out.clamp(0.0, S1_CLAMP_MAX), m, m_down


def _pad_to_multiple(x: torch.Tensor, multiple: int) -> torch.Tensor:
    h, w = x.shape[-2:]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h == 0 and pad_w == 0:
        return x
    return F.pad(x, (0, pad_w, 0, pad_h), mode="reflect")


class SpatialStage(nn.Module):
    """SNR-guided encoder/decoder refinement.

    Encoder: stem conv, then an SP block followed by a stride-2 conv, twice
    (widths w1 -> w2 -> w3). At the bottleneck two branches run in parallel:
    a frequency branch (two FP blocks, global) and a spatial branch (two SP
    blocks, local). They are blended per pixel as
    spatial*S + fourier*(1-S) with the SNR map S resized to the bottleneck
    resolution; with SNR fusion disabled the branches are concatenated and
    fused by a 1x1 conv. Decoder: nearest-neighbor upsample + conv + SP
    block, twice, then a 3x3 output conv. Inputs whose sides are not
    multiples of 4 are reflect-padded and the output cropped back.
    """

    def __init__(self, widths: tuple[int, int, int], use_snr_fusion: bool = True, n_branch_blocks: int = 2):
        super().__init__()
        w1, w2, w3 = widths
        self.use_snr_fusion = use_snr_fusion
        self.stem = nn.Conv2d(3, w1, 3, padding=1)
        self.enc1 = SPBlock(w1)
        self.down1 = nn.Conv2d(w1, w2, 3, stride=2, padding=1)
        self.enc2 = SPBlock(w2)
        self.down2 = nn.Conv2d(w2, w3, 3, stride=2, padding=1)
        self.fourier_branch = nn.Sequential(*(FPBlock(w3) for _ in range(n_branch_blocks)))
        self.spatial_branch = nn.Sequential(*(SPBlock(w3) for _ in range(n_branch_blocks)))
        if not use_snr_fusion:
            self.fuse = nn.Conv2d(2 * w3, w3, 1)
        self.up1 = nn.Conv2d(w3, w2, 3, padding=1)
        self.dec1 = SPBlock(w2)
        self.up2 = nn.Conv2d(w2, w1, 3, padding=1)
        self.dec2 = SPBlock(w1)
        self.out_conv = nn.Conv2d(w1, 3, 3, padding=1)

    def forward(
        self,
        x: torch.Tensor,
        forced_snr: torch.Tensor | float | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (output_s2 clamped to [0,1], snr map at input resolution)."""
        h, w = x.shape[-2:]
        xp = _pad_to_multiple(x, _SPATIAL_MULTIPLE)
        if forced_snr is None:
            # The prior is a fixed statistic of the stage input, not a
            # learned quantity: keep it out of the gradient graph.
            with torch.no_grad():
                s = compute_snr_map(xp.detach())
        elif isinstance(forced_snr, (int, float)):
            s = xp.new_full((xp.shape[0], 1, xp.shape[-2], xp.shape[-1]), float(forced_snr))
        else:
            s = forced_snr.to(dtype=xp.dtype, device=xp.device)
            if s.dim() == 3:
                s = s.unsqueeze(0)
            s = resize_map(s, xp.shape[-2], xp.shape[-1])

        f = self.stem(xp)
        f = self.enc1(f)
        f = self.down1(f)
        f = self.enc2(f)
        f = self.down2(f)

        f_fourier = self.fourier_branch(f)
        f_spatial = self.spatial_branch(f)
        if self.use_snr_fusion:
            s_r = resize_map(s, f.shape[-2], f.shape[-1])
            fused = f_spatial * s_r + f_fourier * (1.0 - s_r)
        else:
            fused = self.fuse(torch.cat([f_spatial, f_fourier], dim=1))

        y = F.interpolate(fused, scale_factor=2, mode="nearest")
        y = self.dec1(self.up1(y))
        y = F.interpolate(y, scale_factor=2, mode="nearest")
        y = self.dec2(self.up2(y))
        y = self.out_conv(y)
        return y[..., :h, :w].clamp(0.0, 1.0), s[..., :h, :w]


class FourLLIE(nn.Module):
    """Two-stage enhancement network; stages honor the config's flags."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        if config.use_frequency_stage:
            self.frequency_stage = FrequencyStage(
                config.nc, config.n_fp_stage1, exposure_mode=config.exposure_correction_mode
            )
        if config.use_spatial_stage:
            self.spatial_stage = SpatialStage(config.widths, use_snr_fusion=config.use_snr_fusion)

    def forward(
        self,
        img: torch.Tensor,
        forced_map: torch.Tensor | float | None = None,
        forced_map_down: torch.Tensor | float | None = None,
        forced_snr: torch.Tensor | float | None = None,
    ) -> StageOutputs:
        squeeze = img.dim() == 3
        x = img.unsqueeze(0) if squeeze else img
        if x.dim() != 4 or x.shape[1] != 3:
            raise InvalidInputError(f"expected a (3, H, W) or (B, 3, H, W) image, got {tuple(img.shape)}")
        if not torch.isfinite(x).all():
            raise InvalidInputError("input image contains non-finite values")
        if x.min() < -1e-6 or x.max() > 1.0 + 1e-6:
            raise InvalidInputError("input image values must lie in [0, 1]")

        amp_map = map_down = snr = None
        if self.config.use_frequency_stage:
            out_s1, amp_map, map_down = self.frequency_stage(x, forced_map, forced_map_down)
        else:
            out_s1 = x

        if self.config.use_spatial_stage:
            out_s2, snr = self.spatial_stage(out_s1, forced_snr)
        else:
            out_s2 = out_s1

        if squeeze:
            out_s1 = out_s1.squeeze(0)
            out_s2 = out_s2.squeeze(0)
            amp_map = amp_map.squeeze(0) if amp_map is not None else None
            map_down = map_down.squeeze(0) if map_down is not None else None
            snr = snr.squeeze(0) if snr is not None else None
        return StageOutputs(output_s1=out_s1, output_s2=out_s2, map=amp_map, map_down=map_down, snr=snr)

    @torch.no_grad()
    def enhance(self, img: torch.Tensor, **forced) -> StageOutputs:
        """Inference entry point (no gradients, eval mode)."""
        was_training = self.training
        self.eval()
        try:
            return self(img, **forced)
        finally:
            self.train(was_training)

    def exposure_correct(self, img: torch.Tensor, **forced) -> StageOutputs:
        """Two-map exposure correction; requires exposure_correction_mode."""
        if not self.config.exposure_correction_mode:
            raise InvalidConfigError("model was not configured with exposure_correction_mode")
        return self.enhance(img, **forced)


def build_model(config: ModelConfig, seed: int = 0) -> FourLLIE:
    """Construct and deterministically initialize a model.

    Convs get fan-in-scaled normal init from a dedicated generator; the
    frequency stage's map head is zeroed so the initial map is uniform 0.5
    (a plain 2x amplitude boost with no spatial structure).
    """
    model = FourLLIE(config)
    gen = torch.Generator().manual_seed(seed)
    kaiming_init_(model, gen)
    if config.use_frequency_stage:
        with torch.no_grad():
            model.frequency_stage.head.weight.zero_()
            model.frequency_stage.head.bias.zero_()
    return model


def count_parameters(config: ModelConfig) -> int:
    """Exact learnable-scalar count for a config."""
    model = FourLLIE(config)
    return sum(p.numel() for p in model.parameters())


_PARAM_PREFIX = "model."


def save_checkpoint(
    model: FourLLIE,
    path: str | Path,
    extra_arrays: Mapping[str, Any] | None = None,
    meta: dict[str, Any] | None = None,
) -> None:
    """Write model parameters (+ optional training state) to a container file."""
    arrays: dict[str, Any] = {_PARAM_PREFIX + k: v for k, v in model.state_dict().items()}
    for k, v in (extra_arrays or {}).items():
        arrays[k] = v
    write_container(path, arrays, model_config=model.config.to_dict(), meta=meta)


def load_checkpoint(path: str | Path, model: FourLLIE | None = None) -> tuple[FourLLIE, Container]:
    """Load a checkpoint; builds a model from the stored config if none given.

    Passing a model whose config differs from the stored one raises
    ConfigMismatchError. Returns (model, container); the container carries
    any extra arrays (optimizer state) and metadata.
    """
    container = read_container(path)
    if container.model_config is None:
        raise CorruptCheckpointError(f"{path} carries no model config")
    stored = ModelConfig.from_dict(container.model_config)
    if model is None:
        model = FourLLIE(stored)
    elif model.config.to_dict() != stored.to_dict():
        raise ConfigMismatchError(
            f"checkpoint config {stored.to_dict()} != model config {model.config.to_dict()}"
        )
    state = model.state_dict()
    for name, tensor in state.items():
        key = _PARAM_PREFIX + name
        if key not in container.arrays:
            raise CorruptCheckpointError(f"checkpoint is missing parameter {name!r}")
        arr = container.arrays[key]
        if tuple(arr.shape) != tuple(tensor.shape):
            raise ConfigMismatchError(
                f"parameter {name!r} has shape {tuple(arr.shape)} in checkpoint, expected {tuple(tensor.shape)}"
            )
        state[name] = torch.from_numpy(arr.copy()).to(tensor.dtype)
    model.load_state_dict(state)
    return model, container

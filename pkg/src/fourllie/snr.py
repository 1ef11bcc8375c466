"""Signal-to-noise-ratio prior map.

The map scores, per pixel, how much of the local signal survives a small
Gaussian blur: S = blurred_gray / |gray - blurred_gray|. Smooth, well-exposed
regions get high values (trust local spatial processing); noisy or textureless
dark regions get low values (trust global frequency processing). The returned
map is normalized to [0, 1] so it can act directly as a convex blend weight.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .errors import InvalidInputError

__all__ = ["compute_snr_map", "resize_map", "gaussian_kernel2d"]

# ITU-R BT.601 luminance weights for RGB -> gray.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Division guard for blur residues that are exactly zero (flat images).
_EPS_SNR = 1e-6

# Outlier clamp quantile applied before min-max normalization: the raw ratio
# is unbounded and a single near-zero-residue pixel would otherwise flatten
# the whole normalized map.
_CLAMP_QUANTILE = 0.999


def gaussian_kernel2d(size: int = 5, sigma: float = 1.0, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Normalized (sums to 1) size x size Gaussian kernel."""
    if size < 1 or size % 2 == 0:
        raise InvalidInputError(f"kernel size must be a positive odd number, got {size}")
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2
    g1 = torch.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = torch.outer(g1, g1)
    return kernel / kernel.sum()


def _blur(gray: torch.Tensor, size: int = 5, sigma: float = 1.0) -> torch.Tensor:
    # gray: (B, 1, H, W); reflect padding keeps borders unbiased.
    kernel = gaussian_kernel2d(size, sigma, dtype=gray.dtype).to(gray.device)
    pad = size // 2
    padded = F.pad(gray, (pad, pad, pad, pad), mode="reflect")
    return F.conv2d(padded, kernel.view(1, 1, size, size))


def compute_snr_map(img: torch.Tensor, normalize: bool = True) -> torch.Tensor:
    """Per-pixel SNR prior of a 3-channel image, normalized to [0, 1].

    Steps: BT.601 gray conversion; 5x5 Gaussian blur (sigma 1.0, reflect
    padding); noise = |gray - blur|; ratio = blur / max(noise, 1e-6); clamp at
    the 99.9th percentile; per-image min-max normalization. A perfectly flat
    image has zero residue everywhere, so the guarded ratio is constant and
    the normalized map is all ones. `normalize=False` returns the raw guarded
    ratio (unbounded), useful for analysis.

    Accepts (3, H, W) or (B, 3, H, W); returns (1, H, W) or (B, 1, H, W).
    """
    squeeze = img.dim() == 3
    x = img.unsqueeze(0) if squeeze else img
    if x.dim() != 4 or x.shape[1] != 3:
        raise InvalidInputError(
            f"compute_snr_map expects a (3, H, W) or (B, 3, H, W) image, got {tuple(img.shape)}"
        )
    if not torch.isfinite(x).all():
        raise InvalidInputError("compute_snr_map input contains non-finite values")

    w = x.new_tensor(_LUMA_WEIGHTS).view(1, 3, 1, 1)
    gray = (x * w).sum(dim=1, keepdim=True)
    blurred = _blur(gray)
    noise = (gray - blurred).abs()
    ratio = blurred / noise.clamp(min=_EPS_SNR)
    if not normalize:
        return ratio.squeeze(0) if squeeze else ratio

    out = torch.empty_like(ratio)
    for b in range(ratio.shape[0]):
        s = ratio[b]
        hi = torch.quantile(s.flatten(), _CLAMP_QUANTILE)
        s = s.clamp(max=hi)
        lo, hi = s.min(), s.max()
        if (hi - lo) <= 1e-12:
            out[b] = torch.ones_like(s)
        else:
            out[b] = (s - lo) / (hi - lo)
    return out.squeeze(0) if squeeze else out


def resize_map(s: torch.Tensor, target_h: int, target_w: int) -> torch.Tensor:
    """Bilinear resampling of a single-channel map to (target_h, target_w).

    Bilinear interpolation of values in [0, 1] stays in [0, 1], so the output
    remains a valid blend weight.
    """
    if target_h < 1 or target_w < 1:
        raise InvalidInputError(f"target dims must be >= 1, got ({target_h}, {target_w})")
    squeeze = s.dim() == 3
    x = s.unsqueeze(0) if squeeze else s
    if x.dim() != 4:
        raise InvalidInputError(f"resize_map expects (1, H, W) or (B, 1, H, W), got {tuple(s.shape)}")
    out = F.interpolate(x, size=(target_h, target_w), mode="bilinear", align_corners=False)
    return out.squeeze(0) if squeeze else out

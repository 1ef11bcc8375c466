"""Full-reference image quality metrics and the evaluation report.

PSNR is computed in RGB over all channels jointly against a dynamic range of
1.0 (the common convention in paired low-light benchmarks). SSIM is the
classic single-scale formulation: 11x11 Gaussian window (sigma 1.5),
K1=0.01, K2=0.03, computed per channel over valid window positions and
averaged. Both are symmetric in their arguments.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F

from .errors import InvalidInputError
from .snr import gaussian_kernel2d

__all__ = ["psnr", "ssim", "EvalRow", "EvalReport", "SSIM_CONVENTIONS"]

SSIM_CONVENTIONS = {
    "window": 11,
    "sigma": 1.5,
    "k1": 0.01,
    "k2": 0.03,
    "dynamic_range": 1.0,
    "channel_handling": "per-channel, averaged",
    "psnr": "RGB joint MSE, dynamic range 1.0",
}


def _check_pair(a: torch.Tensor, b: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.min() < -1e-6 or a.max() > 1 + 1e-6 or b.min() < -1e-6 or b.max() > 1 + 1e-6:
        raise InvalidInputError("metric inputs must lie in [0, 1]")
    return a.to(torch.float64), b.to(torch.float64)


def psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    a64, b64 = _check_pair(a, b)
    mse = F.mse_loss(a64, b64).item()
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    """Structural similarity in [-1, 1]; 1.0 iff the images are identical."""
    a64, b64 = _check_pair(a, b)
    if a64.dim() == 2:
        a64, b64 = a64.unsqueeze(0), b64.unsqueeze(0)
    if a64.dim() != 3:
        raise InvalidInputError(f"expected (C, H, W) images, got {tuple(a.shape)}")
    win = SSIM_CONVENTIONS["window"]
    h, w = a64.shape[-2:]
    if h < win or w < win:
        raise InvalidInputError(f"images must be at least {win}x{win} for SSIM, got {h}x{w}")

    kernel = gaussian_kernel2d(win, SSIM_CONVENTIONS["sigma"], dtype=torch.float64).view(1, 1, win, win)
    c1 = (SSIM_CONVENTIONS["k1"] * SSIM_CONVENTIONS["dynamic_range"]) ** 2
    c2 = (SSIM_CONVENTIONS["k2"] * SSIM_CONVENTIONS["dynamic_range"]) ** 2

    x = a64.unsqueeze(1)  # (C, 1, H, W): valid-mode filtering per channel
    y = b64.unsqueeze(1)
    mu_x = F.conv2d(x, kernel)
    mu_y = F.conv2d(y, kernel)
    var_x = F.conv2d(x * x, kernel) - mu_x * mu_x
    var_y = F.conv2d(y * y, kernel) - mu_y * mu_y
    cov = F.conv2d(x * y, kernel) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return (num / den).mean().item()


@dataclass
class EvalRow:
    id: str
    psnr_db: float
    ssim: float


@dataclass
class EvalReport:
    """Per-image metric rows plus their arithmetic means and provenance."""

    rows: list[EvalRow]
    config_fingerprint: str = ""
    checkpoint_fingerprint: str = ""
    conventions: dict = field(default_factory=lambda: dict(SSIM_CONVENTIONS))

    @property
    def mean_psnr_db(self) -> float:
        return sum(r.psnr_db for r in self.rows) / len(self.rows)

    @property
    def mean_ssim(self) -> float:
        return sum(r.ssim for r in self.rows) / len(self.rows)

    def write(self, csv_path: str | Path) -> Path:
        """Write the row CSV plus a sibling .json aggregate block.

        Returns the JSON path. Extra columns computed by third-party scorers
        (e.g. learned perceptual metrics) can be joined onto the CSV by id.
        """
        csv_path = Path(csv_path)
        lines = ["id,psnr_db,ssim"]
        for r in sorted(self.rows, key=lambda r: r.id):
            lines.append(f"{r.id},{r.psnr_db},{r.ssim}")
        tmp = csv_path.with_name(csv_path.name + ".tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        os.replace(tmp, csv_path)

        json_path = csv_path.with_suffix(".json")
        payload = {
            "n_images": len(self.rows),
            "mean_psnr_db": self.mean_psnr_db,
            "mean_ssim": self.mean_ssim,
            "config_fingerprint": self.config_fingerprint,
            "checkpoint_fingerprint": self.checkpoint_fingerprint,
            "conventions": self.conventions,
        }
        tmp = json_path.with_name(json_path.name + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, json_path)
        return json_path

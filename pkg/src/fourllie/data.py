"""Paired low-/normal-light dataset ingestion, image IO, and augmentation.

On-disk layouts supported:

* paired subdirectories: ``root/low/*.png`` and ``root/high/*.png`` with
  matching file stems;
* a listing file: one ``low_path<TAB>normal_path`` record per line, UTF-8,
  ``#`` comments and blank lines ignored, relative paths resolved against
  the listing file's directory;
* a flat directory of images (unpaired, enhancement-only use).

Images are RGB at the library boundary, 8-bit values divided by 255 and
16-bit by 65535, so every loaded tensor lies in [0, 1].
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .errors import DatasetError, InvalidInputError

__all__ = [
    "ImagePair",
    "PairRecord",
    "DatasetManifest",
    "load_image",
    "save_image",
    "load_manifest",
    "load_pair",
    "augment",
    "synth_tiny_dataset",
]

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass
class PairRecord:
    id: str
    low_path: Path
    normal_path: Path | None = None


@dataclass
class DatasetManifest:
    root: Path
    split: str
    records: list[PairRecord] = field(default_factory=list)
    unpaired: bool = False

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class ImagePair:
    low: torch.Tensor
    normal: torch.Tensor
    id: str


def load_image(path: str | Path) -> torch.Tensor:
    """Decode a PNG/JPEG file to a float32 (C, H, W) tensor in [0, 1]."""
    path = Path(path)
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float32) / 65535.0
            arr = arr[None, :, :]
        else:
            if im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32) / 255.0
            arr = arr.transpose(2, 0, 1)
    return torch.from_numpy(np.ascontiguousarray(arr))


def save_image(img: torch.Tensor, path: str | Path, bit_depth: int = 8) -> None:
    """Write a [0, 1] tensor as a PNG file (atomically: temp + rename).

    RGB images are written 8-bit; single-channel maps may also be written
    16-bit. JPEG output is deliberately unsupported (lossy).
    """
    path = Path(path)
    if path.suffix.lower() != ".png":
        raise InvalidInputError(f"only PNG output is supported, got {path.suffix!r}")
    if img.dim() != 3 or img.shape[0] not in (1, 3):
        raise InvalidInputError(f"expected (1|3, H, W) tensor, got {tuple(img.shape)}")
    arr = img.detach().cpu().clamp(0, 1).numpy()
    if bit_depth == 8:
        data = np.round(arr * 255.0).astype(np.uint8)
        pil = Image.fromarray(data[0], mode="L") if data.shape[0] == 1 else Image.fromarray(
            data.transpose(1, 2, 0), mode="RGB"
        )
    elif bit_depth == 16:
        if arr.shape[0] != 1:
            raise InvalidInputError("16-bit output is only supported for single-channel maps")
        pil = Image.fromarray(np.round(arr[0] * 65535.0).astype(np.uint16))
    else:
        raise InvalidInputError(f"bit_depth must be 8 or 16, got {bit_depth}")
    tmp = path.with_name(path.name + ".tmp")
    pil.save(tmp, format="PNG")
    os.replace(tmp, path)


def _scan_images(directory: Path) -> dict[str, Path]:
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    return {p.stem: p for p in files}


def load_manifest(root: str | Path, layout: str = "auto", split: str = "train") -> DatasetManifest:
    """Build a verified manifest of image pairs.

    layout: "pairs" (low/ + high/ subdirectories), "listing" (a text file of
    tab-separated path pairs), "unpaired" (flat image directory), or "auto"
    to infer from what `root` is.
    """
    root = Path(root)
    if not root.exists():
        raise DatasetError(f"dataset root {root} does not exist")

    if layout == "auto":
        if root.is_file():
            layout = "listing"
        elif (root / "low").is_dir() and (root / "high").is_dir():
            layout = "pairs"
        else:
            layout = "unpaired"

    records: list[PairRecord] = []
    unpaired = False
    if layout == "pairs":
        low_map = _scan_images(root / "low")
        high_map = _scan_images(root / "high")
        for stem in sorted(set(low_map) | set(high_map)):
            if stem not in high_map:
                raise DatasetError(f"low/{low_map[stem].name} has no counterpart in high/")
            if stem not in low_map:
                raise DatasetError(f"high/{high_map[stem].name} has no counterpart in low/")
            records.append(PairRecord(id=stem, low_path=low_map[stem], normal_path=high_map[stem]))
    elif layout == "listing":
        base = root.parent
        seen: set[str] = set()
        for lineno, line in enumerate(root.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DatasetError(f"{root}:{lineno}: expected 'low<TAB>normal', got {line!r}")
            low = (base / parts[0]).resolve() if not Path(parts[0]).is_absolute() else Path(parts[0])
            high = (base / parts[1]).resolve() if not Path(parts[1]).is_absolute() else Path(parts[1])
            for p in (low, high):
                if not p.is_file():
                    raise DatasetError(f"{root}:{lineno}: missing file {p}")
            pair_id = low.stem
            if pair_id in seen:
                raise DatasetError(f"{root}:{lineno}: duplicate pair id {pair_id!r}")
            seen.add(pair_id)
            records.append(PairRecord(id=pair_id, low_path=low, normal_path=high))
    elif layout == "unpaired":
        unpaired = True
        for stem, p in _scan_images(root).items():
            records.append(PairRecord(id=stem, low_path=p, normal_path=None))
    else:
        raise DatasetError(f"unknown layout {layout!r}")

    if not records:
        raise DatasetError(f"dataset at {root} is empty")
    return DatasetManifest(root=root, split=split, records=records, unpaired=unpaired)


def load_pair(record: PairRecord) -> ImagePair:
    """Decode one record; pairs must agree in spatial size."""
    if record.normal_path is None:
        raise DatasetError(f"record {record.id!r} is unpaired, cannot load as a pair")
    low = load_image(record.low_path)
    normal = load_image(record.normal_path)
    if low.shape[-2:] != normal.shape[-2:]:
        raise DatasetError(
            f"pair {record.id!r}: low is {tuple(low.shape[-2:])} but normal is {tuple(normal.shape[-2:])}"
        )
    return ImagePair(low=low, normal=normal, id=record.id)


def _pad_reflect_min_size(img: torch.Tensor, size: int) -> torch.Tensor:
    h, w = img.shape[-2:]
    if h >= size and w >= size:
        return img
    # numpy reflect padding supports pads larger than the image side
    arr = img.numpy()
    pad_h, pad_w = max(0, size - h), max(0, size - w)
    arr = np.pad(arr, ((0, 0), (0, pad_h), (0, pad_w)), mode="reflect")
    return torch.from_numpy(arr)


def augment(pair: ImagePair, crop: int, rng: int | np.random.Generator) -> ImagePair:
    """Identical random crop, 90-degree rotation, and flips for both images.

    Images smaller than the crop are reflect-padded first, so tiny test
    datasets still work. Deterministic for a fixed seed.
    """
    if crop < 1:
        raise InvalidInputError(f"crop must be >= 1, got {crop}")
    gen = np.random.default_rng(rng) if isinstance(rng, (int, np.integer)) else rng
    low = _pad_reflect_min_size(pair.low, crop)
    normal = _pad_reflect_min_size(pair.normal, crop)
    h, w = low.shape[-2:]
    top = int(gen.integers(0, h - crop + 1))
    left = int(gen.integers(0, w - crop + 1))
    k = int(gen.integers(0, 4))
    hflip = bool(gen.integers(0, 2))
    vflip = bool(gen.integers(0, 2))

    def _apply(x: torch.Tensor) -> torch.Tensor:
        x = x[..., top : top + crop, left : left + crop]
        x = torch.rot90(x, k, dims=(-2, -1))
        if hflip:
            x = torch.flip(x, dims=(-1,))
        if vflip:
            x = torch.flip(x, dims=(-2,))
        return x.contiguous()

    return ImagePair(low=_apply(low), normal=_apply(normal), id=pair.id)


def synth_tiny_dataset(
    n: int,
    h: int = 64,
    w: int = 64,
    rng_seed: int = 0,
    root: str | Path | None = None,
) -> DatasetManifest:
    """Generate a small paired dataset on disk for desk-scale training.

    Each normal image is a smooth random color field; its low counterpart is
    gamma-darkened, dimmed, and lightly noised, so low images always have
    strictly lower mean luminance. Same seed, same bytes on disk.
    """
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    root = Path(root) if root is not None else Path(tempfile.mkdtemp(prefix="fourllie_synth_"))
    (root / "low").mkdir(parents=True, exist_ok=True)
    (root / "high").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(rng_seed)
    for i in range(n):
        coarse = rng.standard_normal((3, max(2, h // 8), max(2, w // 8))).astype(np.float32)
        smooth = F.interpolate(
            torch.from_numpy(coarse).unsqueeze(0), size=(h, w), mode="bilinear", align_corners=False
        )[0].numpy()
        lo, hi = smooth.min(), smooth.max()
        normal = 0.25 + 0.70 * (smooth - lo) / max(hi - lo, 1e-12)
        noise = rng.normal(0.0, 0.02, size=normal.shape).astype(np.float32)
        low = np.clip(0.35 * normal**2.2 + noise, 0.0, 1.0)
        save_image(torch.from_numpy(low), root / "low" / f"pair{i:03d}.png")
        save_image(torch.from_numpy(normal.astype(np.float32)), root / "high" / f"pair{i:03d}.png")
    return load_manifest(root, layout="pairs")

"""Self-describing binary container for parameters and training state.

Layout (all integers little-endian):

    bytes 0..7    magic ``b"FOURLLIE"``
    bytes 8..11   uint32 format version
    bytes 12..19  uint64 byte length of the UTF-8 header JSON
    header JSON   {"format_version", "model_config", "arrays": [
                      {"name", "shape", "dtype": "float32"}, ...], "meta"}
    payload       the arrays' raw little-endian float32 data, concatenated
                  in header order

Writes are atomic (temp file + rename) and byte-deterministic: the header is
serialized with sorted keys and arrays keep their insertion order, so saving
identical state twice yields identical files.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import CorruptCheckpointError

__all__ = ["Container", "write_container", "read_container", "MAGIC", "FORMAT_VERSION"]

MAGIC = b"FOURLLIE"
FORMAT_VERSION = 1
_HEADER_STRUCT = struct.Struct("<8sIQ")


@dataclass
class Container:
    """In-memory view of one container file."""

    arrays: dict[str, np.ndarray]
    model_config: dict[str, Any] | None = None
    meta: dict[str, Any] = field(default_factory=dict)


def _as_f4(name: str, value: Any) -> np.ndarray:
    arr = np.asarray(
        value.detach().cpu().numpy() if hasattr(value, "detach") else value,
        dtype="<f4",
    )
    if not np.isfinite(arr).all():
        raise ValueError(f"array {name!r} contains non-finite values")
    if not arr.flags["C_CONTIGUOUS"]:
        # note: np.ascontiguousarray would promote 0-d arrays to 1-d
        arr = np.ascontiguousarray(arr) if arr.ndim else arr.copy()
    return arr


def write_container(
    path: str | Path,
    arrays: Mapping[str, Any],
    model_config: dict[str, Any] | None = None,
    meta: dict[str, Any] | None = None,
) -> None:
    """Serialize named arrays (stored as little-endian float32) plus metadata."""
    path = Path(path)
    converted = {name: _as_f4(name, value) for name, value in arrays.items()}
    header = {
        "format_version": FORMAT_VERSION,
        "model_config": model_config,
        "arrays": [
            {"name": name, "shape": list(arr.shape), "dtype": "float32"}
            for name, arr in converted.items()
        ],
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER_STRUCT.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for arr in converted.values():
            fh.write(arr.tobytes())
    os.replace(tmp, path)


def read_container(path: str | Path) -> Container:
    """Read a container file back; raises CorruptCheckpointError on damage."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CorruptCheckpointError(f"cannot read {path}: {exc}") from exc

    if len(raw) < _HEADER_STRUCT.size:
        raise CorruptCheckpointError(f"{path} is too short to be a checkpoint")
    magic, version, header_len = _HEADER_STRUCT.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CorruptCheckpointError(f"{path} has bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptCheckpointError(f"{path} has unsupported format version {version}")

    body_start = _HEADER_STRUCT.size
    if len(raw) < body_start + header_len:
        raise CorruptCheckpointError(f"{path} is truncated inside the header")
    try:
        header = json.loads(raw[body_start : body_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path} has an unparseable header: {exc}") from exc

    arrays: dict[str, np.ndarray] = {}
    offset = body_start + header_len
    for entry in header.get("arrays", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 4
        if len(raw) < offset + nbytes:
            raise CorruptCheckpointError(
                f"{path} is truncated inside array {entry['name']!r}"
            )
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        arrays[entry["name"]] = arr.copy()
        offset += nbytes
    if offset != len(raw):
        raise CorruptCheckpointError(f"{path} has {len(raw) - offset} trailing bytes")

    return Container(
        arrays=arrays,
        model_config=header.get("model_config"),
        meta=header.get("meta", {}),
    )

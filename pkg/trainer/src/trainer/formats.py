"""Interchange formats shared with the reconstruction toolkit.

Deliberately reimplemented from the published file contract rather than
imported: the two packages are coupled only through bytes on disk.

.fmap layout (little endian): header `<4sBBBBII` = magic b"FMAP", version 1,
dtype code (0 = float32, 1 = int32), channel count, reserved 0, height,
width; then the row-major payload. Texture views are RGBA PNG with alpha 255
marking valid pixels.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image

MAGIC = b"FMAP"
VERSION = 1
_HEADER = struct.Struct("<4sBBBBII")
_DTYPES = {0: np.float32, 1: np.int32}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.int32): 1}


def read_fmap(path) -> np.ndarray:
    """Read an .fmap raster as (h, w) or (h, w, channels)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, dtype_code, channels, _, h, w = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION or dtype_code not in _DTYPES:
        raise ValueError(f"{path}: not a supported raster file")
    dtype = np.dtype(_DTYPES[dtype_code])
    expected = _HEADER.size + h * w * channels * dtype.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: payload size mismatch")
    data = np.frombuffer(raw, dtype=dtype.newbyteorder("<"), offset=_HEADER.size)
    data = data.astype(dtype).reshape(h, w, channels)
    return data[..., 0] if channels == 1 else data


def write_fmap(path, values: np.ndarray) -> None:
    """Write a (h, w) or (h, w, channels) raster atomically."""
    values = np.asarray(values)
    if values.ndim == 2:
        values = values[..., None]
    if values.ndim != 3:
        raise ValueError(f"raster must be 2D or 3D, got shape {values.shape}")
    code = _DTYPE_CODES.get(values.dtype)
    if code is None:
        raise ValueError(f"unsupported raster dtype {values.dtype}")
    h, w, channels = values.shape
    header = _HEADER.pack(MAGIC, VERSION, code, channels, 0, h, w)
    payload = np.ascontiguousarray(values, dtype=values.dtype.newbyteorder("<"))
    _atomic_write(path, header + payload.tobytes())


def read_texture(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an RGBA texture PNG as (rgb uint8 (h,w,3), valid bool (h,w))."""
    with Image.open(path) as img:
        rgba = np.asarray(img.convert("RGBA"))
    return rgba[..., :3].copy(), rgba[..., 3] == 255


def write_texture(path, rgb: np.ndarray, valid: np.ndarray) -> None:
    """Write an RGBA texture PNG atomically; alpha 255 marks valid pixels."""
    rgba = np.dstack([rgb.astype(np.uint8), np.where(valid, 255, 0).astype(np.uint8)])
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    Image.fromarray(rgba, mode="RGBA").save(tmp, format="PNG")
    os.replace(tmp, path)


def read_ply_count(path) -> int:
    """Vertex count of a text PLY file (the only field the trainer needs)."""
    with open(path) as fh:
        for line in fh:
            if line.startswith("element vertex"):
                return int(line.split()[2])
            if line.strip() == "end_header":
                break
    raise ValueError(f"{path}: no vertex element found")


def depth_name(n: int) -> str:
    return f"view_{n}_depth.fmap"


def texture_name(n: int) -> str:
    return f"view_{n}_texture.png"


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)

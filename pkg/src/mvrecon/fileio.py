"""File formats: `.fmap` rasters, text PLY clouds, texture PNGs, view dirs.

`.fmap` layout (little-endian):
    bytes 0-3   magic b"FMAP"
    byte  4     version (1)
    byte  5     dtype code: 0 = float32, 1 = int32
    byte  6     channel count
    byte  7     reserved (0)
    bytes 8-11  uint32 height
    bytes 12-15 uint32 width
    payload     height * width * channels values, row-major

Supported layouts: (float32, 1) depth map, (int32, 1) index map,
(float32, 4) object-coordinate image (xyz + mask).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from .cloud import ColoredPointCloud
from .rasters import DepthMap, IndexMap, NocsImage, TextureDepthMap, TextureImage

MAGIC = b"FMAP"
VERSION = 1
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<i4")}
_HEADER = struct.Struct("<4sBBBBII")

Raster = Union[DepthMap, IndexMap, NocsImage]


class FormatError(Exception):
    """Base class for file format violations."""


class MalformedHeaderError(FormatError):
    pass


class ChannelCountError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


def _raster_payload(raster: Raster) -> tuple[int, int, np.ndarray]:
    if isinstance(raster, DepthMap):
        return 0, 1, raster.values[..., None]
    if isinstance(raster, IndexMap):
        return 1, 1, raster.indices[..., None]
    if isinstance(raster, NocsImage):
        mask = raster.validity.astype(np.float32)
        return 0, 4, np.concatenate([raster.coords, mask[..., None]], axis=2)
    raise TypeError(f"unsupported raster type {type(raster).__name__}")


def write_raster(raster: Raster, path) -> None:
    dtype_code, channels, payload = _raster_payload(raster)
    if not np.isfinite(np.asarray(payload, dtype=float)).all():
        raise ValueError("raster payload must be finite")
    h, w = payload.shape[:2]
    data = np.ascontiguousarray(payload, dtype=_DTYPE_CODES[dtype_code])
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dtype_code, channels, 0, h, w))
        fh.write(data.tobytes())


def read_raster(path) -> Raster:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise MalformedHeaderError(f"{path}: file shorter than header")
    magic, version, dtype_code, channels, _, h, w = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise MalformedHeaderError(f"{path}: bad magic or version")
    if dtype_code not in _DTYPE_CODES:
        raise MalformedHeaderError(f"{path}: unknown dtype code {dtype_code}")
    dtype = _DTYPE_CODES[dtype_code]
    expected = h * w * channels * dtype.itemsize
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(h, w, channels)
    if (dtype_code, channels) == (0, 1):
        return DepthMap(values=data[..., 0])
    if (dtype_code, channels) == (1, 1):
        return IndexMap(indices=data[..., 0])
    if (dtype_code, channels) == (0, 4):
        return NocsImage(coords=data[..., :3], validity=data[..., 3] >= 0.5)
    raise ChannelCountError(
        f"{path}: unsupported layout (dtype code {dtype_code}, {channels} channels)"
    )


def write_texture(texture: TextureImage, path) -> None:
    """RGBA PNG; alpha 255 marks valid pixels, 0 invalid."""
    rgba = np.zeros(texture.values.shape[:2] + (4,), dtype=np.uint8)
    rgba[..., :3] = texture.values
    rgba[..., 3] = np.where(texture.validity, 255, 0)
    Image.fromarray(rgba, mode="RGBA").save(path)


def read_texture(path) -> TextureImage:
    img = Image.open(path).convert("RGBA")
    rgba = np.asarray(img)
    return TextureImage(values=rgba[..., :3], validity=rgba[..., 3] > 0)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_ply(cloud: ColoredPointCloud, path) -> None:
    """Text PLY with x y z and, when present, red green blue."""
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(cloud)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        if cloud.has_colors:
            fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write("end_header\n")
        if cloud.has_colors:
            for (x, y, z), (r, g, b) in zip(cloud.positions, cloud.colors):
                fh.write(f"{_fmt(x)} {_fmt(y)} {_fmt(z)} {r} {g} {b}\n")
        else:
            for x, y, z in cloud.positions:
                fh.write(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n")


def read_ply(path) -> ColoredPointCloud:
    with open(path) as fh:
        line = fh.readline().strip()
        if line != "ply":
            raise MalformedHeaderError(f"{path}: not a PLY file")
        n_vertices = None
        properties: list[str] = []
        in_vertex = False
        while True:
            line = fh.readline()
            if not line:
                raise MalformedHeaderError(f"{path}: header never ends")
            tokens = line.split()
            if not tokens or tokens[0] == "comment":
                continue
            if tokens[0] == "format":
                if tokens[1] != "ascii":
                    raise FormatError(f"{path}: only ascii PLY supported")
            elif tokens[0] == "element":
                if tokens[1] == "vertex":
                    n_vertices = int(tokens[2])
                    in_vertex = True
                else:
                    raise FormatError(f"{path}: unsupported PLY element '{tokens[1]}'")
            elif tokens[0] == "property" and in_vertex:
                properties.append(tokens[-1])
            elif tokens[0] == "end_header":
                break
        if n_vertices is None:
            raise MalformedHeaderError(f"{path}: no vertex element")
        has_colors = properties[:6] == ["x", "y", "z", "red", "green", "blue"]
        if not has_colors and properties[:3] != ["x", "y", "z"]:
            raise FormatError(f"{path}: unsupported vertex properties {properties}")
        positions = np.zeros((n_vertices, 3))
        colors = np.zeros((n_vertices, 3), dtype=np.uint8) if has_colors else None
        for i in range(n_vertices):
            tokens = fh.readline().split()
            if len(tokens) < len(properties):
                raise TruncatedPayloadError(f"{path}: vertex {i} is incomplete")
            positions[i] = [float(t) for t in tokens[:3]]
            if has_colors:
                colors[i] = [int(t) for t in tokens[3:6]]
        return ColoredPointCloud(positions=positions, colors=colors)


def write_manifest(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key} = {value}\n")


def read_manifest(path) -> dict[str, str]:
    entries: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}: bad manifest line {line!r}")
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def depth_path(dirpath, n: int) -> Path:
    return Path(dirpath) / f"view_{n}_depth.fmap"


def texture_path(dirpath, n: int) -> Path:
    return Path(dirpath) / f"view_{n}_texture.png"


def index_path(dirpath, n: int) -> Path:
    return Path(dirpath) / f"view_{n}_index.fmap"

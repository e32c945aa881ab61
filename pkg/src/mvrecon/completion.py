"""Pluggable view completion.

The completion stage is a contract, not a network: it consumes the 8 partial
views and returns 8 completed views of the same size, emitting the invalid
sentinel for background pixels. Two modes exist: joint texture-depth
completion ("mtdcn", depth and texture masks stay pixelwise equal) and
depth-only completion ("mdcn"). Neural completers plug in through
`complete_external`; `complete_identity` and `complete_baseline_fill` keep the
pipeline runnable without any trained model.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .projection import ViewSet
from .rasters import DepthMap, IndexMap, TextureDepthMap, TextureImage

MODE_MTDCN = "mtdcn"
MODE_MDCN = "mdcn"


def complete_identity(views: ViewSet) -> ViewSet:
    """Pass views through unchanged (pipeline oracle)."""
    return views


def _fill_pass(depth: np.ndarray, texture: np.ndarray, valid: np.ndarray):
    """One Jacobi fill pass; reads only the previous pass's rasters."""
    h, w = depth.shape
    count = np.zeros((h, w), dtype=np.int32)
    depth_sum = np.zeros((h, w), dtype=np.float64)
    tex_sum = np.zeros((h, w, 3), dtype=np.float64)
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            if dv == 0 and du == 0:
                continue
            # Destination window receiving the neighbor at offset (dv, du).
            v0, v1 = max(dv, 0), h + min(dv, 0)
            u0, u1 = max(du, 0), w + min(du, 0)
            nb_valid = valid[v0 - dv:v1 - dv, u0 - du:u1 - du]
            nb_depth = depth[v0 - dv:v1 - dv, u0 - du:u1 - du]
            nb_tex = texture[v0 - dv:v1 - dv, u0 - du:u1 - du]
            count[v0:v1, u0:u1] += nb_valid
            depth_sum[v0:v1, u0:u1] += np.where(nb_valid, nb_depth, 0.0)
            tex_sum[v0:v1, u0:u1] += np.where(nb_valid[..., None], nb_tex, 0.0)
    fill = ~valid & (count >= 3)
    new_depth = depth.copy()
    new_texture = texture.copy()
    safe = np.maximum(count, 1)
    new_depth[fill] = (depth_sum[fill] / safe[fill]).astype(np.float32)
    new_texture[fill] = np.floor(tex_sum[fill] / safe[fill, None] + 0.5).astype(np.uint8)
    return new_depth, new_texture, valid | fill


def complete_baseline_fill(views: ViewSet, iterations: int) -> ViewSet:
    """Iterative hole fill: invalid pixels with >= 3 valid 8-neighbors take the
    neighbor mean (depth) and rounded channelwise mean (texture). Valid input
    pixels never change; the valid set only grows.
    """
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    out = []
    for view in views.views:
        depth = view.depth.values.copy()
        texture = view.texture.values.copy()
        valid = view.depth.valid.copy()
        for _ in range(iterations):
            new_depth, new_texture, new_valid = _fill_pass(depth, texture, valid)
            if np.array_equal(new_valid, valid):
                break
            depth, texture, valid = new_depth, new_texture, new_valid
        depth[~valid] = 0.0
        out.append(
            TextureDepthMap(
                depth=DepthMap(values=depth),
                texture=TextureImage(values=texture, validity=valid),
            )
        )
    return ViewSet(views=tuple(out), indices=views.indices)


def complete_external(dirpath, mode: str, expected_shape: tuple[int, int] | None = None):
    """Load externally-completed views (e.g. neural completions) from disk.

    Returns a ViewSet in "mtdcn" mode, or a list of 8 DepthMap in "mdcn" mode.
    """
    if mode not in (MODE_MTDCN, MODE_MDCN):
        raise ValueError(f"unknown completion mode {mode!r}")
    dirpath = Path(dirpath)
    depths: list[DepthMap] = []
    textures: list[TextureImage] = []
    for n in range(8):
        dpath = fileio.depth_path(dirpath, n)
        if not dpath.exists():
            raise FileNotFoundError(f"missing view {n}: {dpath}")
        depth = fileio.read_raster(dpath)
        if not isinstance(depth, DepthMap):
            raise fileio.ChannelCountError(f"view {n}: not a depth map")
        if expected_shape is not None and depth.shape != tuple(expected_shape):
            raise ValueError(
                f"view {n}: depth is {depth.shape}, expected {tuple(expected_shape)}"
            )
        depths.append(depth)
        if mode == MODE_MTDCN:
            tpath = fileio.texture_path(dirpath, n)
            if not tpath.exists():
                raise FileNotFoundError(f"missing view {n}: {tpath}")
            texture = fileio.read_texture(tpath)
            if texture.shape != depth.shape:
                raise ValueError(
                    f"view {n}: texture {texture.shape} does not match depth {depth.shape}"
                )
            textures.append(texture)
    if mode == MODE_MDCN:
        return depths
    views = tuple(TextureDepthMap(depth=d, texture=t) for d, t in zip(depths, textures))
    indices = tuple(
        IndexMap(indices=np.full(d.shape, -1, dtype=np.int32)) for d in depths
    )
    return ViewSet(views=views, indices=indices)


def detect_external_mode(dirpath) -> str:
    """"mtdcn" when the directory carries texture files for all 8 views."""
    dirpath = Path(dirpath)
    if all(fileio.texture_path(dirpath, n).exists() for n in range(8)):
        return MODE_MTDCN
    return MODE_MDCN


@dataclass(frozen=True)
class CompleterSpec:
    """Parsed `--completer` selector."""

    kind: str  # identity | fill | external
    iterations: int = 0
    directory: str = ""


def parse_completer(selector: str) -> CompleterSpec:
    """Parse `identity`, `fill:<iters>`, or `external:<dir>`."""
    if selector == "identity":
        return CompleterSpec(kind="identity")
    if selector.startswith("fill:"):
        try:
            iters = int(selector.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad fill iteration count in {selector!r}") from None
        if iters < 0:
            raise ValueError("fill iterations must be >= 0")
        return CompleterSpec(kind="fill", iterations=iters)
    if selector.startswith("external:"):
        return CompleterSpec(kind="external", directory=selector.split(":", 1)[1])
    raise ValueError(f"unknown completer {selector!r}")

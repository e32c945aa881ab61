"""Joint texture/shape mapping and pseudo-rendering into the 8-view set.

Rendering resolves pixel collisions by depth pooling: each point lands in one
cell of a U x U sub-pixel grid, each cell keeps its nearest point, and each
pixel keeps the nearest cell. Since min of per-cell minima equals the global
per-pixel minimum, the implementation scatters directly into the H x W raster;
ties go to the lowest source-point index so results are deterministic.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import Camera, ViewRig
from .cloud import ColoredPointCloud
from . import fileio
from .rasters import DepthMap, IndexMap, NocsImage, TextureDepthMap, TextureImage

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectionConfig:
    """Pseudo-rendering parameters. U=5 for pipeline views, 50 for GT."""

    upsample: int = 5

    def __post_init__(self):
        if self.upsample < 1:
            raise ValueError(f"upsample must be >= 1, got {self.upsample}")


@dataclass
class ViewSet:
    """The 8 (depth, texture) pairs plus pooling-index maps, in rig order."""

    views: tuple[TextureDepthMap, ...]
    indices: tuple[IndexMap, ...]

    def __post_init__(self):
        self.views = tuple(self.views)
        self.indices = tuple(self.indices)
        if len(self.views) != 8 or len(self.indices) != 8:
            raise ValueError("a view set holds exactly 8 views and 8 index maps")
        shapes = {v.shape for v in self.views} | {ix.shape for ix in self.indices}
        if len(shapes) != 1:
            raise ValueError(f"view rasters disagree on size: {shapes}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.views[0].shape

    def depths(self) -> list[DepthMap]:
        return [v.depth for v in self.views]

    def textures(self) -> list[TextureImage]:
        return [v.texture for v in self.views]


def joint_texture_shape_mapping(x: TextureImage, c: NocsImage) -> ColoredPointCloud:
    """Pair the object-coordinate image with the aligned texture image.

    One point per valid coordinate pixel, in row-major pixel order; position
    from `c`, color from `x` at the same pixel. Coordinate pixels the texture
    does not cover get color (0,0,0) with a False color_valid flag.
    """
    if c.shape != x.shape:
        raise ValueError(f"texture {x.shape} and coordinates {c.shape} differ in size")
    mask = c.validity
    positions = c.coords[mask].astype(float)
    colors = np.where(x.validity[mask, None], x.values[mask], 0).astype(np.uint8)
    return ColoredPointCloud(
        positions=positions, colors=colors, color_valid=x.validity[mask]
    )


def _project_points(positions: np.ndarray, camera: Camera):
    """Camera-space depth and continuous pixel coordinates for each point."""
    cam = camera.pose.apply(positions)
    z = cam[:, 2]
    k = camera.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.f * cam[:, 0] / z + k.cx
        v = k.f * cam[:, 1] / z + k.cy
    return z, u, v


def project_view(
    cloud: ColoredPointCloud, camera: Camera, cfg: ProjectionConfig = ProjectionConfig()
) -> tuple[TextureDepthMap, IndexMap]:
    """Pseudo-render the cloud from one camera."""
    k = camera.intrinsics
    h, w, u_factor = k.height, k.width, cfg.upsample

    depth = np.zeros((h, w), dtype=np.float32)
    texture = np.zeros((h, w, 3), dtype=np.uint8)
    tex_valid = np.zeros((h, w), dtype=bool)
    index = np.full((h, w), -1, dtype=np.int32)

    n = len(cloud)
    if n:
        z, u, v = _project_points(cloud.positions, camera)
        keep = (z > 0) & (u >= 0) & (u < w) & (v >= 0) & (v < h)
        n_skipped = int(n - keep.sum())
        if n_skipped:
            log.debug("project_view: skipped %d of %d points", n_skipped, n)
        src = np.nonzero(keep)[0]
        if src.size:
            # Cell/pixel assignment; floor(u*U)//U == floor(u) for u >= 0,
            # so the per-pixel winner can be found without materializing cells.
            cu = np.floor(u[src] * u_factor).astype(np.int64)
            cv = np.floor(v[src] * u_factor).astype(np.int64)
            pix = (cv // u_factor) * w + (cu // u_factor)
            order = np.lexsort((src, z[src], pix))
            pix_sorted = pix[order]
            first = np.ones(len(order), dtype=bool)
            first[1:] = pix_sorted[1:] != pix_sorted[:-1]
            winners = src[order[first]]
            rows, cols = pix_sorted[first] // w, pix_sorted[first] % w
            depth[rows, cols] = z[winners].astype(np.float32)
            index[rows, cols] = winners.astype(np.int32)
            if cloud.has_colors:
                texture[rows, cols] = cloud.colors[winners]
                if cloud.color_valid is None:
                    tex_valid[rows, cols] = True
                else:
                    tex_valid[rows, cols] = cloud.color_valid[winners]

    return (
        TextureDepthMap(
            depth=DepthMap(values=depth),
            texture=TextureImage(values=texture, validity=tex_valid),
        ),
        IndexMap(indices=index),
    )


def joint_project(
    cloud: ColoredPointCloud,
    rig: ViewRig,
    cfg: ProjectionConfig = ProjectionConfig(),
    threads: int = 1,
) -> ViewSet:
    """Pseudo-render the cloud from all 8 rig cameras (views are independent)."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda cam: project_view(cloud, cam, cfg), rig))
    else:
        results = [project_view(cloud, cam, cfg) for cam in rig]
    return ViewSet(views=tuple(r[0] for r in results), indices=tuple(r[1] for r in results))


def save_view_set(views: ViewSet, dirpath, manifest_extra: dict | None = None) -> None:
    """Write the 8 view files plus manifest.txt into a directory."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for n, (view, index) in enumerate(zip(views.views, views.indices)):
        fileio.write_raster(view.depth, fileio.depth_path(dirpath, n))
        fileio.write_texture(view.texture, fileio.texture_path(dirpath, n))
        fileio.write_raster(index, fileio.index_path(dirpath, n))
    if manifest_extra is not None:
        fileio.write_manifest(dirpath / "manifest.txt", manifest_extra)


def load_view_set(dirpath) -> ViewSet:
    """Read the 8 view files of a directory written by save_view_set."""
    dirpath = Path(dirpath)
    views, indices = [], []
    for n in range(8):
        depth = fileio.read_raster(fileio.depth_path(dirpath, n))
        if not isinstance(depth, DepthMap):
            raise fileio.ChannelCountError(f"view {n}: depth file is not a depth map")
        texture = fileio.read_texture(fileio.texture_path(dirpath, n))
        idx_file = fileio.index_path(dirpath, n)
        if idx_file.exists():
            index = fileio.read_raster(idx_file)
            if not isinstance(index, IndexMap):
                raise fileio.ChannelCountError(f"view {n}: index file is not an index map")
        else:
            index = IndexMap(indices=np.full(depth.shape, -1, dtype=np.int32))
        views.append(TextureDepthMap(depth=depth, texture=texture))
        indices.append(index)
    return ViewSet(views=tuple(views), indices=tuple(indices))

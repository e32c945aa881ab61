"""Back-projection, joint fusion of the 8 views, and outlier filtering.

Provenance (view index, pixel u, pixel v) rides along with every fused point
so the voting filter can re-project points into the other 7 views and texture
lookup stays possible after depth-only completion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .camera import Camera, ViewRig
from .cloud import ColoredPointCloud
from .projection import _project_points
from .rasters import DepthMap, TextureDepthMap, TextureImage


@dataclass(frozen=True)
class FusionConfig:
    vote_threshold: int = 5
    vote_depth_tolerance: float = 0.01
    radius: float = 0.012
    min_neighbors: int = 6
    enable_voting: bool = True
    enable_radius_filter: bool = True

    def __post_init__(self):
        if not 1 <= self.vote_threshold <= 8:
            raise ValueError(f"vote_threshold must be in [1, 8], got {self.vote_threshold}")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.min_neighbors < 0:
            raise ValueError(f"min_neighbors must be >= 0, got {self.min_neighbors}")


def back_project(d: DepthMap, camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Lift a depth map into world-space points.

    Returns (positions (N, 3), pixels (N, 2) as (u, v)) in row-major pixel
    order. Rays go through pixel centers (u + 0.5, v + 0.5).
    """
    k = camera.intrinsics
    vs, us = np.nonzero(d.valid)
    depth = d.values[vs, us].astype(float)
    x = (us + 0.5 - k.cx) * depth / k.f
    y = (vs + 0.5 - k.cy) * depth / k.f
    cam = np.stack([x, y, depth], axis=1)
    rot, t = camera.pose.rotation, camera.pose.translation
    positions = (cam - t) @ rot
    return positions, np.stack([us, vs], axis=1)


def fuse_mtdcn(
    views: list[TextureDepthMap], rig: ViewRig
) -> tuple[ColoredPointCloud, np.ndarray]:
    """Fuse jointly-completed views into a colored cloud (the S_dt path).

    Requires depth and texture validity to agree pixelwise in every view.
    Returns the cloud and its (N, 3) provenance array of (view, u, v).
    """
    for n, view in enumerate(views):
        if not view.masks_aligned():
            raise ValueError(f"view {n}: depth and texture validity masks differ")
    return _fuse(
        [v.depth for v in views], [v.texture for v in views], rig, nearest_texture=False
    )


def fuse_mdcn(
    depths: list[DepthMap], textures: list[TextureImage], rig: ViewRig
) -> tuple[ColoredPointCloud, np.ndarray]:
    """Fuse depth-only completions, recoloring from separate texture maps.

    Positions are exactly those of fusing the depths alone; a point whose
    pixel has no valid texture takes the nearest valid texture pixel
    (Euclidean pixel distance, ties to smaller v then smaller u).
    """
    return _fuse(depths, textures, rig, nearest_texture=True)


def _nearest_texture_lookup(texture: TextureImage, pixels: np.ndarray) -> np.ndarray:
    """Colors for query pixels (u, v), snapping to the nearest valid pixel."""
    colors = np.zeros((len(pixels), 3), dtype=np.uint8)
    if not len(pixels):
        return colors
    valid_v, valid_u = np.nonzero(texture.validity)
    if not len(valid_v):
        return colors  # entirely invalid texture: keep (0, 0, 0)
    direct = texture.validity[pixels[:, 1], pixels[:, 0]]
    colors[direct] = texture.values[pixels[direct, 1], pixels[direct, 0]]
    missing = np.nonzero(~direct)[0]
    if len(missing):
        coords = np.stack([valid_u, valid_v], axis=1).astype(float)
        tree = cKDTree(coords)
        query = pixels[missing].astype(float)
        dist, _ = tree.query(query)
        for qi, (q, dmin) in enumerate(zip(query, dist)):
            cand = tree.query_ball_point(q, dmin + 1e-9)
            best = min(
                cand,
                key=lambda j: (
                    (coords[j, 0] - q[0]) ** 2 + (coords[j, 1] - q[1]) ** 2,
                    coords[j, 1],
                    coords[j, 0],
                ),
            )
            u, v = int(coords[best, 0]), int(coords[best, 1])
            colors[missing[qi]] = texture.values[v, u]
    return colors


def _fuse(depths, textures, rig, nearest_texture: bool):
    positions, colors, color_valid, provenance = [], [], [], []
    for n, (depth, texture, camera) in enumerate(zip(depths, textures, rig)):
        pos, pixels = back_project(depth, camera)
        if not len(pos):
            continue
        if nearest_texture:
            col = _nearest_texture_lookup(texture, pixels)
            cval = np.ones(len(pos), dtype=bool)
        else:
            col = texture.values[pixels[:, 1], pixels[:, 0]]
            cval = texture.validity[pixels[:, 1], pixels[:, 0]]
        positions.append(pos)
        colors.append(col)
        color_valid.append(cval)
        provenance.append(
            np.column_stack([np.full(len(pos), n, dtype=np.int64), pixels])
        )
    if not positions:
        empty = ColoredPointCloud(
            positions=np.zeros((0, 3)),
            colors=np.zeros((0, 3), dtype=np.uint8),
            color_valid=np.zeros(0, dtype=bool),
        )
        return empty, np.zeros((0, 3), dtype=np.int64)
    cloud = ColoredPointCloud(
        positions=np.concatenate(positions),
        colors=np.concatenate(colors),
        color_valid=np.concatenate(color_valid),
    )
    return cloud, np.concatenate(provenance)


def voting_filter(
    cloud: ColoredPointCloud,
    provenance: np.ndarray,
    depths: list[DepthMap],
    rig: ViewRig,
    cfg: FusionConfig = FusionConfig(),
) -> tuple[ColoredPointCloud, np.ndarray]:
    """Keep points that are depth-consistent in enough views.

    Every point starts with 1 vote (its own view) and gains one per other
    view where it lands on a valid pixel whose stored depth matches the
    point's projected depth within the tolerance.
    """
    n_pts = len(cloud)
    if n_pts == 0:
        return cloud, provenance
    votes = np.ones(n_pts, dtype=np.int32)
    own_view = provenance[:, 0]
    for n, (depth, camera) in enumerate(zip(depths, rig)):
        other = own_view != n
        if not other.any():
            continue
        z, u, v = _project_points(cloud.positions, camera)
        k = camera.intrinsics
        ui = np.floor(u).astype(np.int64)
        vi = np.floor(v).astype(np.int64)
        in_frame = (z > 0) & (ui >= 0) & (ui < k.width) & (vi >= 0) & (vi < k.height)
        agree = np.zeros(n_pts, dtype=bool)
        idx = np.nonzero(in_frame)[0]
        stored = depth.values[vi[idx], ui[idx]].astype(float)
        agree[idx] = (stored != 0.0) & (
            np.abs(z[idx] - stored) <= cfg.vote_depth_tolerance
        )
        votes += (agree & other).astype(np.int32)
    keep = votes >= cfg.vote_threshold
    return cloud.select(keep), provenance[keep]


def radius_filter(
    cloud: ColoredPointCloud, cfg: FusionConfig = FusionConfig()
) -> ColoredPointCloud:
    """Keep points with at least min_neighbors others within the radius."""
    if cfg.min_neighbors == 0 or len(cloud) == 0:
        return cloud
    tree = cKDTree(cloud.positions)
    counts = tree.query_ball_point(
        cloud.positions, cfg.radius, return_length=True
    )
    keep = (counts - 1) >= cfg.min_neighbors  # subtract the point itself
    return cloud.select(keep)


def fuse_and_filter(
    depths: list[DepthMap],
    textures: list[TextureImage] | None,
    rig: ViewRig,
    cfg: FusionConfig = FusionConfig(),
    joint: bool = True,
    views: list[TextureDepthMap] | None = None,
) -> ColoredPointCloud:
    """Fuse then run the voting and radius filters per the configuration."""
    if joint:
        cloud, provenance = fuse_mtdcn(views, rig)
        depth_list = [v.depth for v in views]
    else:
        cloud, provenance = fuse_mdcn(depths, textures, rig)
        depth_list = depths
    if cfg.enable_voting:
        cloud, provenance = voting_filter(cloud, provenance, depth_list, rig, cfg)
    if cfg.enable_radius_filter:
        cloud = radius_filter(cloud, cfg)
    return cloud

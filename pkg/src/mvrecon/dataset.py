"""Ground-truth data generation: mesh sampling and projection-based rendering.

Depth/texture views and object-coordinate images are rendered by projecting a
dense sampled cloud with a large pooling buffer (U=50), not by ray tracing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .camera import Camera, Intrinsics, DEFAULT_INTRINSICS, ViewRig, look_at
from .cloud import ColoredPointCloud
from .projection import ProjectionConfig, ViewSet, joint_project, project_view
from .fusion import back_project
from .rasters import NocsImage

log = logging.getLogger(__name__)


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3)
    triangles: np.ndarray  # (T, 3) int
    colors: Optional[np.ndarray] = None  # (V, 3) uint8

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle indices out of range")
        if self.colors is not None:
            self.colors = np.ascontiguousarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(self.colors) != len(self.vertices):
                raise ValueError("per-vertex colors do not match vertex count")

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def load_obj(path) -> TriangleMesh:
    """Load an OBJ mesh: v (optionally with r g b in [0,1]) and f statements.

    Faces with more than 3 vertices are fan-triangulated; any other statement
    is ignored with a warning.
    """
    vertices, colors, triangles = [], [], []
    ignored: set[str] = set()
    with open(path) as fh:
        for line in fh:
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "v":
                vals = [float(t) for t in tokens[1:]]
                vertices.append(vals[:3])
                if len(vals) >= 6:
                    colors.append([round(c * 255) for c in vals[3:6]])
            elif tokens[0] == "f":
                idx = [int(t.split("/")[0]) - 1 for t in tokens[1:]]
                for i in range(1, len(idx) - 1):
                    triangles.append([idx[0], idx[i], idx[i + 1]])
            else:
                ignored.add(tokens[0])
    if ignored:
        log.warning("load_obj: ignored OBJ statements %s", sorted(ignored))
    mesh_colors = None
    if colors and len(colors) == len(vertices):
        mesh_colors = np.array(colors, dtype=np.uint8)
    return TriangleMesh(
        vertices=np.array(vertices, dtype=float).reshape(-1, 3),
        triangles=np.array(triangles, dtype=np.int64).reshape(-1, 3),
        colors=mesh_colors,
    )


def sample_mesh(mesh: TriangleMesh, n: int = 100000, seed: int = 0) -> ColoredPointCloud:
    """Sample n points uniformly over the mesh surface (area-weighted)."""
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero total surface area")
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(areas), size=n, p=areas / total)
    r1 = rng.random(n)
    r2 = rng.random(n)
    # Uniform barycentric placement via the square-root trick.
    sqrt_r1 = np.sqrt(r1)
    w0 = 1.0 - sqrt_r1
    w1 = sqrt_r1 * (1.0 - r2)
    w2 = sqrt_r1 * r2
    i0, i1, i2 = mesh.triangles[tri].T
    positions = (
        w0[:, None] * mesh.vertices[i0]
        + w1[:, None] * mesh.vertices[i1]
        + w2[:, None] * mesh.vertices[i2]
    )
    colors = None
    if mesh.colors is not None:
        colors = np.clip(
            np.floor(
                w0[:, None] * mesh.colors[i0]
                + w1[:, None] * mesh.colors[i1]
                + w2[:, None] * mesh.colors[i2]
                + 0.5
            ),
            0,
            255,
        ).astype(np.uint8)
    return ColoredPointCloud(positions=positions, colors=colors)


def render_gt_views(
    dense: ColoredPointCloud, rig: ViewRig, upsample: int = 50, threads: int = 1
) -> ViewSet:
    """Render ground-truth depth/texture views of a dense sampled cloud."""
    if len(dense) < 1:
        raise ValueError("dense cloud is empty")
    return joint_project(dense, rig, ProjectionConfig(upsample=upsample), threads=threads)


def render_nocs_image(
    dense: ColoredPointCloud, input_camera: Camera, upsample: int = 50
) -> NocsImage:
    """Object-coordinate image of the visible surface from the input camera.

    Renders a depth map by projection, back-projects every valid pixel, and
    stores the resulting object coordinates at that pixel; validity equals
    depth validity, so the result is pixel-aligned with the input view.
    """
    view, _ = project_view(dense, input_camera, ProjectionConfig(upsample=upsample))
    positions, pixels = back_project(view.depth, input_camera)
    coords = np.zeros(view.depth.shape + (3,), dtype=np.float32)
    coords[pixels[:, 1], pixels[:, 0]] = np.clip(positions, -0.5, 0.5)
    return NocsImage(coords=coords, validity=view.depth.valid)


def random_view_camera(
    seed: int, distance: float = 2.0, intrinsics: Intrinsics = DEFAULT_INTRINSICS
) -> Camera:
    """Camera at a uniform-random direction on the distance sphere, up (0,1,0)."""
    rng = np.random.default_rng(seed)
    while True:
        direction = rng.normal(size=3)
        norm = np.linalg.norm(direction)
        # Reject near-degenerate directions (parallel to the up vector).
        if norm > 1e-6 and abs(direction[1] / norm) < 0.999:
            break
    eye = distance * direction / norm
    return Camera(intrinsics=intrinsics, pose=look_at(eye, (0.0, 0.0, 0.0)))

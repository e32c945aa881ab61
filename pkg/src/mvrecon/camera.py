"""Pinhole camera model and the fixed 8-view cube rig."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Lexicographic sign triples for the 8 cube-vertex viewpoints.
CUBE_SIGNS = (
    (-1, -1, -1),
    (-1, -1, +1),
    (-1, +1, -1),
    (-1, +1, +1),
    (+1, -1, -1),
    (+1, -1, +1),
    (+1, +1, -1),
    (+1, +1, +1),
)

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics for a square-pixel camera."""

    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not (0 <= self.cx < self.width):
            raise ValueError(f"cx {self.cx} outside [0, {self.width})")
        if not (0 <= self.cy < self.height):
            raise ValueError(f"cy {self.cy} outside [0, {self.height})")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.f, 0.0, self.cx], [0.0, self.f, self.cy], [0.0, 0.0, 1.0]]
        )


#: Default profile: 256x256 rasters, f chosen so the radius-0.5 object sphere
#: seen from distance 2.0 fits in frame with margin.
DEFAULT_INTRINSICS = Intrinsics(f=300.0, cx=127.5, cy=127.5, width=256, height=256)


@dataclass(frozen=True)
class Pose:
    """World-to-camera rigid transform.

    Camera axes: +x right, +y down, +z forward.
    """

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not np.allclose(r.T @ r, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform world points (N, 3) into camera space."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.rotation.T + self.translation

    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class Camera:
    intrinsics: Intrinsics
    pose: Pose


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> Pose:
    """Pose of a camera at `eye` looking at `target` with the given up hint."""
    eye = np.asarray(eye, dtype=float).reshape(3)
    target = np.asarray(target, dtype=float).reshape(3)
    up = np.asarray(up, dtype=float).reshape(3)

    forward = target - eye
    dist = np.linalg.norm(forward)
    if dist <= 1e-9:
        raise ValueError("degenerate look-at: eye coincides with target")
    forward = forward / dist

    down = -up
    right = np.cross(down, forward)
    norm = np.linalg.norm(right)
    if norm <= 1e-9:
        raise ValueError("degenerate look-at: up parallel to view direction")
    right = right / norm
    down = np.cross(forward, right)

    rotation = np.stack([right, down, forward])
    translation = -rotation @ eye
    return Pose(rotation=rotation, translation=translation)


@dataclass(frozen=True)
class ViewRig:
    """The 8 cube-vertex cameras, all looking at the origin."""

    cameras: tuple[Camera, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.cameras) != 8:
            raise ValueError(f"rig needs exactly 8 cameras, got {len(self.cameras)}")

    def __iter__(self):
        return iter(self.cameras)

    def __getitem__(self, i: int) -> Camera:
        return self.cameras[i]


def make_view_rig(distance: float = 2.0, intrinsics: Intrinsics = DEFAULT_INTRINSICS) -> ViewRig:
    """Cameras at distance*(+-1,+-1,+-1)/sqrt(3) in lexicographic sign order."""
    if distance <= 0:
        raise ValueError(f"distance must be positive, got {distance}")
    cams = []
    for signs in CUBE_SIGNS:
        center = distance * np.array(signs, dtype=float) / np.sqrt(3.0)
        cams.append(Camera(intrinsics=intrinsics, pose=look_at(center, (0.0, 0.0, 0.0))))
    return ViewRig(cameras=tuple(cams))

"""Raster types shared across the pipeline.

Depth is camera-space z in object units, with 0.0 as the invalid sentinel.
All rasters of one view are pixel-aligned (H, W).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEPTH_INVALID = 0.0
INDEX_INVALID = -1


@dataclass
class DepthMap:
    """(H, W) float32 camera-space depth; 0.0 marks invalid pixels."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError(f"depth map must be 2-D, got shape {self.values.shape}")

    @property
    def valid(self) -> np.ndarray:
        return self.values != DEPTH_INVALID

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class TextureImage:
    """(H, W, 3) uint8 RGB with a (H, W) validity mask."""

    values: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.uint8)
        self.validity = np.ascontiguousarray(self.validity, dtype=bool)
        if self.values.ndim != 3 or self.values.shape[2] != 3:
            raise ValueError(f"texture must be (H, W, 3), got {self.values.shape}")
        if self.validity.shape != self.values.shape[:2]:
            raise ValueError("texture validity mask does not match image size")

    @property
    def shape(self) -> tuple[int, int]:
        return self.validity.shape


@dataclass
class NocsImage:
    """(H, W, 3) object-coordinate raster, coords in [-0.5, 0.5], plus mask."""

    coords: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float32)
        self.validity = np.ascontiguousarray(self.validity, dtype=bool)
        if self.coords.ndim != 3 or self.coords.shape[2] != 3:
            raise ValueError(f"nocs image must be (H, W, 3), got {self.coords.shape}")
        if self.validity.shape != self.coords.shape[:2]:
            raise ValueError("nocs validity mask does not match image size")
        valid_coords = self.coords[self.validity]
        if valid_coords.size and (
            valid_coords.min() < -0.5 - 1e-6 or valid_coords.max() > 0.5 + 1e-6
        ):
            raise ValueError("valid nocs coordinates fall outside [-0.5, 0.5]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.validity.shape


@dataclass
class IndexMap:
    """(H, W) int32 source-point index per pixel; -1 marks no point."""

    indices: np.ndarray

    def __post_init__(self):
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int32)
        if self.indices.ndim != 2:
            raise ValueError(f"index map must be 2-D, got shape {self.indices.shape}")

    @property
    def valid(self) -> np.ndarray:
        return self.indices != INDEX_INVALID

    @property
    def shape(self) -> tuple[int, int]:
        return self.indices.shape


@dataclass
class TextureDepthMap:
    """One view's aligned depth and texture pair."""

    depth: DepthMap
    texture: TextureImage

    def __post_init__(self):
        if self.depth.shape != self.texture.shape:
            raise ValueError(
                f"depth {self.depth.shape} and texture {self.texture.shape} differ"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def masks_aligned(self) -> bool:
        """True when depth and texture validity agree pixelwise."""
        return bool(np.array_equal(self.depth.valid, self.texture.validity))

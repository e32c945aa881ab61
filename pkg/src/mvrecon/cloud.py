"""Colored point cloud container."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class ColoredPointCloud:
    """Points in object units with optional per-point RGB.

    `color_valid` flags points whose color was actually observed; points
    carried through without texture keep color (0, 0, 0) and a False flag.
    """

    positions: np.ndarray
    colors: Optional[np.ndarray] = None
    color_valid: Optional[np.ndarray] = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float).reshape(-1, 3)
        if not np.isfinite(self.positions).all():
            raise ValueError("point positions must be finite")
        if self.colors is not None:
            self.colors = np.ascontiguousarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(self.colors) != len(self.positions):
                raise ValueError(
                    f"{len(self.colors)} colors for {len(self.positions)} points"
                )
        if self.color_valid is not None:
            if self.colors is None:
                raise ValueError("color_valid given without colors")
            self.color_valid = np.ascontiguousarray(self.color_valid, dtype=bool).reshape(-1)
            if len(self.color_valid) != len(self.positions):
                raise ValueError("color_valid length does not match positions")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def has_colors(self) -> bool:
        return self.colors is not None

    def select(self, mask_or_indices) -> "ColoredPointCloud":
        """Subset of the cloud, preserving order."""
        return ColoredPointCloud(
            positions=self.positions[mask_or_indices],
            colors=None if self.colors is None else self.colors[mask_or_indices],
            color_valid=None if self.color_valid is None else self.color_valid[mask_or_indices],
        )

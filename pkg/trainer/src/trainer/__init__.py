"""Toy-scale training for the reconstruction pipeline's pluggable networks.

This package talks to the reconstruction toolkit only through its CLI and
on-disk interchange formats (.fmap rasters, RGBA PNG textures, PLY clouds);
it never imports it.
"""

from .config import TrainerConfig, TrainGapStats
from .losses import masked_l1
from .models import UNet
from .train import (
    Checkpoint,
    dual_train_gap,
    export_completions,
    load_checkpoint,
    train_2d3d,
    train_mdcn,
    train_mtdcn,
)

__all__ = [
    "Checkpoint",
    "TrainGapStats",
    "TrainerConfig",
    "UNet",
    "dual_train_gap",
    "export_completions",
    "load_checkpoint",
    "masked_l1",
    "train_2d3d",
    "train_mdcn",
    "train_mtdcn",
]

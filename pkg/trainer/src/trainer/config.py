"""Training hyperparameters and the dual-training gap statistics."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrainerConfig:
    """Optimization settings shared by the three networks.

    Per-network learning rates and batch sizes follow the reference schedule;
    the resolution is a toy-scale 64x64 (the completion nets see the 8 views
    concatenated vertically into one 512x64 image).
    """

    lr_2d3d: float = 0.0009
    batch_2d3d: int = 1  # pix2pix-style; the schedule pins no batch for this net
    lr_mtdcn: float = 0.0008
    batch_mtdcn: int = 48
    lr_mdcn: float = 0.0012
    batch_mdcn: int = 128
    beta1: float = 0.5
    beta2: float = 0.999
    epochs: int = 200
    decay_start: int = 100  # constant lr before, linear decay to 0 after
    views_per_good: int = 8  # views/object for the "good" coordinate net
    views_per_bad: int = 1  # views/object for the "bad" one
    resolution: int = 64
    base_width: int = 16
    seed: int = 0

    def __post_init__(self):
        for name in ("lr_2d3d", "lr_mtdcn", "lr_mdcn"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("batch_2d3d", "batch_mtdcn", "batch_mdcn"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.decay_start <= self.epochs:
            raise ValueError("decay_start must lie within the epoch range")
        if self.views_per_bad < 1 or self.views_per_good < self.views_per_bad:
            raise ValueError("need views_per_good >= views_per_bad >= 1")

    def lr_factor(self, epoch: int) -> float:
        """Constant for the first `decay_start` epochs, then linear to 0."""
        if epoch < self.decay_start:
            return 1.0
        span = self.epochs - self.decay_start
        return 1.0 - (epoch - self.decay_start) / max(span, 1)


@dataclass(frozen=True)
class TrainGapStats:
    """Generalization gap of a completion net across input pedigrees.

    f_train is its mean masked L1 on inputs it trained on (derived from the
    weaker coordinate net), f_test on inputs from the stronger net's held-out
    views; epsilon = |f_train - f_test| / f_train.
    """

    f_train: float
    f_test: float

    @property
    def epsilon(self) -> float:
        if self.f_train == 0.0:
            return 0.0 if self.f_test == 0.0 else float("inf")
        return abs(self.f_train - self.f_test) / self.f_train

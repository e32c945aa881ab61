"""Chamfer distance, point-to-point ICP, and evaluation reports."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .cloud import ColoredPointCloud


def _positions(cloud) -> np.ndarray:
    if isinstance(cloud, ColoredPointCloud):
        return cloud.positions
    return np.asarray(cloud, dtype=float).reshape(-1, 3)


def chamfer_distance(a, b) -> float:
    """Sum of the two directional means of squared NN distances, scaled by 100."""
    pa, pb = _positions(a), _positions(b)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("chamfer distance is undefined for empty clouds")
    d_ab, _ = cKDTree(pb).query(pa)
    d_ba, _ = cKDTree(pa).query(pb)
    return 100.0 * float(np.mean(d_ab**2) + np.mean(d_ba**2))


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self applied after other."""
        return RigidTransform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )


IDENTITY_TRANSFORM = RigidTransform(rotation=np.eye(3), translation=np.zeros(3))


def best_rigid_transform(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rotation+translation mapping src onto dst (SVD, no scale)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    cov = (src - mu_s).T @ (dst - mu_d)
    if np.linalg.matrix_rank(cov) < 2:
        raise ValueError("degenerate correspondence covariance (rank < 2)")
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rotation=rot, translation=mu_d - rot @ mu_s)


@dataclass
class IcpResult:
    transform: RigidTransform
    aligned: np.ndarray  # (N, 3) transformed source positions
    rmse_history: list[float] = field(default_factory=list)
    n_iterations: int = 0


def icp_align(src, tgt, max_iters: int = 100, tol: float = 1e-6) -> IcpResult:
    """Point-to-point ICP with SVD updates.

    Iterates nearest-neighbor correspondence and the optimal rigid update
    until the relative RMSE change drops below tol. The mean squared
    correspondence distance is non-increasing across iterations.
    """
    src_pos = _positions(src)
    tgt_pos = _positions(tgt)
    if len(src_pos) < 3 or len(tgt_pos) < 3:
        raise ValueError("ICP needs at least 3 points per cloud")
    tree = cKDTree(tgt_pos)
    transform = IDENTITY_TRANSFORM
    aligned = src_pos.copy()
    history: list[float] = []
    prev_rmse = None
    iters = 0
    for iters in range(1, max_iters + 1):
        dist, nn = tree.query(aligned)
        rmse = float(np.sqrt(np.mean(dist**2)))
        history.append(rmse)
        if prev_rmse is not None and abs(prev_rmse - rmse) < tol * max(prev_rmse, 1e-30):
            break
        prev_rmse = rmse
        step = best_rigid_transform(aligned, tgt_pos[nn])
        transform = step.compose(transform)
        aligned = step.apply(aligned)
    return IcpResult(
        transform=transform, aligned=aligned, rmse_history=history, n_iterations=iters
    )


@dataclass
class EvalReport:
    cd: float
    cd_after_icp: Optional[float] = None
    relative_improvement: Optional[float] = None
    n_pred: int = 0
    n_gt: int = 0
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        out = {
            "cd": self.cd,
            "n_pred": self.n_pred,
            "n_gt": self.n_gt,
            "runtime_seconds": self.runtime_seconds,
        }
        if self.cd_after_icp is not None:
            out["cd_after_icp"] = self.cd_after_icp
            out["relative_improvement"] = self.relative_improvement
        return out


def eval_report(pred, gt, with_icp: bool = False) -> EvalReport:
    """CD of pred against gt, optionally with ICP alignment first."""
    start = time.perf_counter()
    pred_pos, gt_pos = _positions(pred), _positions(gt)
    cd = chamfer_distance(pred_pos, gt_pos)
    cd_after = improvement = None
    if with_icp:
        result = icp_align(pred_pos, gt_pos)
        cd_after = chamfer_distance(result.aligned, gt_pos)
        improvement = 0.0 if cd == 0.0 else (cd - cd_after) / cd
    return EvalReport(
        cd=cd,
        cd_after_icp=cd_after,
        relative_improvement=improvement,
        n_pred=len(pred_pos),
        n_gt=len(gt_pos),
        runtime_seconds=time.perf_counter() - start,
    )

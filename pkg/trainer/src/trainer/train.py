"""Training loops, checkpointing, export, and the dual-training gap probe."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import formats
from .config import TrainerConfig, TrainGapStats
from .data import (
    DEPTH_SCALE,
    FULL_RES,
    N_VIEWS,
    CompletionDataset,
    NocsDataset,
    run_mvrecon,
)
from .losses import completion_loss
from .models import UNet

KIND_2D3D = "2d3d"
KIND_MTDCN = "mtdcn"
KIND_MDCN = "mdcn"

# input channels exclude the validity plane; outputs append a predicted mask
_CHANNELS = {KIND_2D3D: (3, 4), KIND_MTDCN: (4, 5), KIND_MDCN: (1, 2)}
# completion nets predict a correction on top of the partial input values
_RESIDUAL = {KIND_2D3D: 0, KIND_MTDCN: 4, KIND_MDCN: 1}


def _build_model(kind: str, cfg: TrainerConfig) -> UNet:
    cin, cout = _CHANNELS[kind]
    return UNet(cin, cout, base=cfg.base_width, residual_channels=_RESIDUAL[kind])


@dataclass
class Checkpoint:
    """A trained network plus the numbers needed to reuse and audit it."""

    kind: str
    model: UNet
    config: TrainerConfig
    final_l1: float
    loss_history: list[float] = field(default_factory=list)

    def save(self, path) -> None:
        torch.save(
            {
                "kind": self.kind,
                "state": self.model.state_dict(),
                "config": self.config.__dict__,
                "final_l1": self.final_l1,
                "loss_history": self.loss_history,
            },
            path,
        )


def load_checkpoint(path) -> Checkpoint:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg = TrainerConfig(**payload["config"])
    model = _build_model(payload["kind"], cfg)
    model.load_state_dict(payload["state"])
    model.eval()
    return Checkpoint(
        kind=payload["kind"],
        model=model,
        config=cfg,
        final_l1=payload["final_l1"],
        loss_history=payload["loss_history"],
    )


def _fit(kind, inputs, target_values, target_masks, lr, batch, cfg) -> Checkpoint:
    """Shared optimization loop; returns the final-epoch masked value L1."""
    if not len(inputs):
        raise ValueError("cannot train on an empty dataset")
    torch.manual_seed(cfg.seed)
    cin, _ = _CHANNELS[kind]
    if inputs.shape[1] != cin:
        raise ValueError(f"{kind} expects {cin} input channels, got {inputs.shape[1]}")
    model = _build_model(kind, cfg)
    opt = torch.optim.Adam(model.parameters(), lr=lr, betas=(cfg.beta1, cfg.beta2))
    sched = torch.optim.lr_scheduler.LambdaLR(opt, cfg.lr_factor)
    gen = torch.Generator().manual_seed(cfg.seed)
    n = len(inputs)
    batch = min(batch, n)
    history = []
    final_l1 = float("nan")
    for _ in range(cfg.epochs):
        order = torch.randperm(n, generator=gen)
        epoch_l1, seen = 0.0, 0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            pred = model(inputs[idx])
            loss, value_l1 = completion_loss(
                pred, target_values[idx], target_masks[idx]
            )
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_l1 += float(value_l1.detach()) * len(idx)
            seen += len(idx)
        sched.step()
        final_l1 = epoch_l1 / seen
        history.append(final_l1)
    model.eval()
    return Checkpoint(
        kind=kind, model=model, config=cfg, final_l1=final_l1, loss_history=history
    )


def _stack(arrays) -> torch.Tensor:
    if not len(arrays):
        raise ValueError("cannot train on an empty dataset")
    return torch.from_numpy(np.stack(arrays))


def train_2d3d(dataset: NocsDataset, cfg: TrainerConfig = TrainerConfig()) -> Checkpoint:
    """RGB image -> object-coordinate image (coordinates + validity mask)."""
    inputs = _stack(dataset.inputs)
    targets = _stack(dataset.targets)
    return _fit(
        KIND_2D3D, inputs, targets[:, :3], targets[:, 3:4], cfg.lr_2d3d,
        cfg.batch_2d3d, cfg,
    )


def train_mtdcn(dataset: CompletionDataset, cfg: TrainerConfig = TrainerConfig()) -> Checkpoint:
    """Joint texture-depth completion on the 8-view concatenated image."""
    inputs = _stack(dataset.inputs)
    targets = _stack(dataset.targets)
    return _fit(
        KIND_MTDCN, inputs[:, :4], targets[:, :4], targets[:, 4:5],
        cfg.lr_mtdcn, cfg.batch_mtdcn, cfg,
    )


def train_mdcn(dataset: CompletionDataset, cfg: TrainerConfig = TrainerConfig()) -> Checkpoint:
    """Depth-only completion on the 8-view concatenated image."""
    inputs = _stack(dataset.inputs)
    targets = _stack(dataset.targets)
    return _fit(
        KIND_MDCN, inputs[:, :1], targets[:, :1], targets[:, 4:5],
        cfg.lr_mdcn, cfg.batch_mdcn, cfg,
    )


def eval_l1(ckpt: Checkpoint, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Masked value L1 of a completion checkpoint on one view stack."""
    cin, _ = _CHANNELS[ckpt.kind]
    with torch.no_grad():
        pred = ckpt.model(torch.from_numpy(inputs[None, :cin]))
        n_values = pred.shape[1] - 1
        _, value_l1 = completion_loss(
            pred,
            torch.from_numpy(targets[None, :n_values]),
            torch.from_numpy(targets[None, 4:5]),
        )
    return float(value_l1)


def export_completions(ckpt: Checkpoint, input_stack: np.ndarray, out_dir) -> Path:
    """Write one object's completed views in the pipeline interchange format.

    Predictions are made at the training resolution, the mask is thresholded
    at 0.5, and the views are nearest-neighbor upsampled to the pipeline's
    working raster size. MTDCN exports depth + texture; MDCN depth only.
    """
    if ckpt.kind not in (KIND_MTDCN, KIND_MDCN):
        raise ValueError(f"cannot export completions from a {ckpt.kind} checkpoint")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cin, _ = _CHANNELS[ckpt.kind]
    res = input_stack.shape[2]
    scale = FULL_RES // res
    with torch.no_grad():
        pred = ckpt.model(torch.from_numpy(input_stack[None, :cin]))[0].numpy()
    for n in range(N_VIEWS):
        tile = pred[:, n * res:(n + 1) * res]
        mask = tile[-1] >= 0.5
        depth = np.where(mask, tile[0] * DEPTH_SCALE, 0.0).astype(np.float32)
        depth = depth.repeat(scale, axis=0).repeat(scale, axis=1)
        formats.write_fmap(out_dir / formats.depth_name(n), depth)
        if ckpt.kind == KIND_MTDCN:
            rgb = np.clip(tile[1:4] * 255.0, 0, 255).astype(np.uint8).transpose(1, 2, 0)
            rgb[~mask] = 0
            rgb = rgb.repeat(scale, axis=0).repeat(scale, axis=1)
            valid = mask.repeat(scale, axis=0).repeat(scale, axis=1)
            formats.write_texture(out_dir / formats.texture_name(n), rgb, valid)
    return out_dir


def predict_nocs(ckpt: Checkpoint, rgb_input: np.ndarray) -> np.ndarray:
    """Predicted object-coordinate image as a (res, res, 4) float32 raster.

    Coordinates are clipped to the object cube, the mask channel thresholded
    at 0.5, and background coordinates zeroed, matching the file contract.
    """
    if ckpt.kind != KIND_2D3D:
        raise ValueError(f"need a {KIND_2D3D} checkpoint, got {ckpt.kind}")
    with torch.no_grad():
        pred = ckpt.model(torch.from_numpy(rgb_input[None]))[0].numpy()
    mask = pred[3] >= 0.5
    coords = np.clip(pred[:3], -0.5, 0.5)
    coords[:, ~mask] = 0.0
    return np.concatenate(
        [coords, mask[None].astype(np.float32)]
    ).transpose(1, 2, 0).astype(np.float32)


@dataclass(frozen=True)
class GapObject:
    """One object of a multi-view dataset for the dual-training probe."""

    render_dirs: tuple[Path, ...]  # one per input view; all share the GT views

    @property
    def gt_view_dir(self) -> Path:
        return self.render_dirs[0]


def _reconstruct_from_prediction(ckpt, render_dir, resolution, workdir) -> Path:
    """Write a predicted coordinate image and reconstruct partial views."""
    from .data import load_nocs_pair  # avoids a cycle at import time

    rgb_input, _ = load_nocs_pair(render_dir, resolution)
    nocs = predict_nocs(ckpt, rgb_input)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    formats.write_fmap(workdir / "nocs.fmap", nocs)
    rgb = np.clip(rgb_input * 255.0, 0, 255).astype(np.uint8).transpose(1, 2, 0)
    formats.write_texture(workdir / "rgb.png", rgb, nocs[..., 3] >= 0.5)
    recon = workdir / "recon"
    run_mvrecon([
        "reconstruct", "--rgb", str(workdir / "rgb.png"),
        "--nocs", str(workdir / "nocs.fmap"), "--out", str(recon),
        "--no-voting", "--no-radius-filter",
    ])
    return recon / "views"


def dual_train_gap(
    dataset: list[GapObject], cfg: TrainerConfig, workdir
) -> tuple[Checkpoint, Checkpoint, TrainGapStats]:
    """Measure how completion accuracy transfers across input pedigrees.

    Trains a "good" coordinate net on `views_per_good` views per object and a
    "bad" one on `views_per_bad`, then trains a joint completion net on views
    reconstructed from the bad net's predictions on the training objects and
    evaluates it on views from the good net's predictions on held-out
    objects. Returns both coordinate checkpoints and the gap statistics.
    """
    from .data import load_view_stack

    if len(dataset) < 2:
        raise ValueError("need at least 2 objects (1 train, 1 held out)")
    short = [i for i, obj in enumerate(dataset) if len(obj.render_dirs) < cfg.views_per_good]
    if short:
        raise ValueError(
            f"objects {short} have fewer than {cfg.views_per_good} views"
        )
    n_test = max(1, len(dataset) // 5)
    train_objs, test_objs = dataset[:-n_test], dataset[-n_test:]

    def nocs_dataset(objects, views_per_object):
        out = NocsDataset()
        for oid, obj in enumerate(objects):
            for render_dir in obj.render_dirs[:views_per_object]:
                out.add_pair(render_dir, cfg.resolution, object_id=oid)
        return out

    good = train_2d3d(nocs_dataset(train_objs, cfg.views_per_good), cfg)
    bad = train_2d3d(nocs_dataset(train_objs, cfg.views_per_bad), cfg)

    workdir = Path(workdir)
    completion = CompletionDataset()
    for i, obj in enumerate(train_objs):
        views = _reconstruct_from_prediction(
            bad, obj.render_dirs[0], cfg.resolution, workdir / f"train_{i}"
        )
        completion.inputs.append(load_view_stack(views, cfg.resolution))
        completion.targets.append(load_view_stack(obj.gt_view_dir, cfg.resolution))
    completer = train_mtdcn(completion, cfg)

    f_train = float(
        np.mean([
            eval_l1(completer, x, y)
            for x, y in zip(completion.inputs, completion.targets)
        ])
    )
    test_l1 = []
    for i, obj in enumerate(test_objs):
        views = _reconstruct_from_prediction(
            good, obj.render_dirs[0], cfg.resolution, workdir / f"test_{i}"
        )
        test_l1.append(
            eval_l1(
                completer,
                load_view_stack(views, cfg.resolution),
                load_view_stack(obj.gt_view_dir, cfg.resolution),
            )
        )
    return good, bad, TrainGapStats(f_train=f_train, f_test=float(np.mean(test_l1)))

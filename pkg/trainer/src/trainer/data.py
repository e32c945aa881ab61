"""Dataset generation and loading.

Objects are randomly-colored low-relief plates (open surfaces, so every
point is seen by most of the 8 fusion cameras). Ground-truth views, the
object-coordinate image, and the partial (hole-ridden) views all come from
the reconstruction toolkit's CLI; this module only writes meshes, invokes
the CLI, and converts the interchange rasters to training tensors.
"""

from __future__ import annotations

import shutil
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats

FULL_RES = 256  # raster size the reconstruction CLI works at
DEPTH_SCALE = 4.0  # normalizes camera-space depth (< 3 for the default rig)
N_VIEWS = 8


def mvrecon_command() -> list[str]:
    """Locate the reconstruction CLI (PATH entry point or module form)."""
    exe = shutil.which("mvrecon")
    if exe:
        return [exe]
    return [sys.executable, "-m", "mvrecon.cli"]


def run_mvrecon(args: list[str]) -> subprocess.CompletedProcess:
    proc = subprocess.run(
        mvrecon_command() + args, capture_output=True, text=True
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"mvrecon {' '.join(args)} failed ({proc.returncode}): {proc.stderr.strip()}"
        )
    return proc


def write_relief_obj(path, rng: np.random.Generator, grid: int = 8) -> None:
    """Random low-relief colored plate over [-0.4, 0.4]^2, z = smooth bumps."""
    ticks = np.linspace(-0.4, 0.4, grid + 1)
    xs, ys = np.meshgrid(ticks, ticks, indexing="xy")
    z = np.zeros_like(xs)
    for _ in range(3):
        cx, cy = rng.uniform(-0.3, 0.3, 2)
        amp = rng.uniform(-0.05, 0.05)
        sigma = rng.uniform(0.1, 0.25)
        z += amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma**2))
    base = rng.uniform(0.2, 0.8, 3)
    tilt = rng.uniform(-0.5, 0.5, (2, 3))
    colors = np.clip(
        base + xs[..., None] * tilt[0] + ys[..., None] * tilt[1], 0.0, 1.0
    )
    lines = []
    for j in range(grid + 1):
        for i in range(grid + 1):
            c = colors[j, i]
            lines.append(
                f"v {xs[j, i]} {ys[j, i]} {z[j, i]} {c[0]:.4f} {c[1]:.4f} {c[2]:.4f}"
            )
    for j in range(grid):
        for i in range(grid):
            a = j * (grid + 1) + i + 1
            b, c, d = a + 1, a + grid + 2, a + grid + 1
            lines.append(f"f {a} {b} {c}")
            lines.append(f"f {a} {c} {d}")
    Path(path).write_text("\n".join(lines) + "\n")


def random_input_eye(rng: np.random.Generator, distance: float = 2.0) -> np.ndarray:
    """Camera position on the distance sphere, biased away from plate-edge-on."""
    direction = rng.normal(size=3)
    direction[2] = abs(direction[2]) + 0.8
    return distance * direction / np.linalg.norm(direction)


@dataclass(frozen=True)
class ObjectPaths:
    """Locations of one object's rendered and reconstructed artifacts."""

    mesh: Path
    render_dir: Path  # GT views + nocs.fmap + input_texture.png + gt_cloud.ply
    recon_dir: Path  # partial.ply + views/ (partial pseudo-rendered views)

    @property
    def partial_views(self) -> Path:
        return self.recon_dir / "views"


def prepare_object(root, index: int, seed: int, points: int = 50000) -> ObjectPaths:
    """Generate one training object end to end through the CLI."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    mesh = root / f"object_{index}.obj"
    write_relief_obj(mesh, rng)
    render_dir = root / f"render_{index}"
    eye = random_input_eye(rng)
    run_mvrecon([
        "render", "--mesh", str(mesh), "--out", str(render_dir),
        "--points", str(points), "--seed", str(seed),
        f"--input-view={eye[0]},{eye[1]},{eye[2]}",  # = form: values may be negative
    ])
    recon_dir = root / f"recon_{index}"
    run_mvrecon([
        "reconstruct", "--rgb", str(render_dir / "input_texture.png"),
        "--nocs", str(render_dir / "nocs.fmap"), "--out", str(recon_dir),
        "--no-voting", "--no-radius-filter",
    ])
    return ObjectPaths(mesh=mesh, render_dir=render_dir, recon_dir=recon_dir)


def prepare_gap_views(root, index: int, seed: int, n_views: int,
                      points: int = 50000) -> list[Path]:
    """Render one object from `n_views` input cameras (GT views are shared).

    Returns the render directories, each holding its own nocs.fmap and
    input_texture.png plus the identical 8 ground-truth views.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    mesh = root / f"object_{index}.obj"
    write_relief_obj(mesh, rng)
    dirs = []
    for k in range(n_views):
        render_dir = root / f"render_{index}_v{k}"
        eye = random_input_eye(rng)
        run_mvrecon([
            "render", "--mesh", str(mesh), "--out", str(render_dir),
            "--points", str(points), "--seed", str(seed),
            f"--input-view={eye[0]},{eye[1]},{eye[2]}",
        ])
        dirs.append(render_dir)
    return dirs


def downsample_view(depth: np.ndarray, rgb: np.ndarray, valid: np.ndarray, out: int):
    """Block-reduce a view, keeping each block's nearest valid sample.

    Depth uses a masked block minimum (0 stays the background sentinel) and
    the texture follows the winning sample, preserving pixel alignment.
    """
    h = depth.shape[0]
    if h % out:
        raise ValueError(f"cannot reduce {h} to {out} with integer blocks")
    b = h // out
    d = np.where(valid, depth, np.inf).reshape(out, b, out, b)
    d = d.transpose(0, 2, 1, 3).reshape(out, out, b * b)
    flat_idx = d.argmin(axis=2)
    rows, cols = np.indices((out, out))
    best = d[rows, cols, flat_idx]
    new_valid = np.isfinite(best)
    new_depth = np.where(new_valid, best, 0.0).astype(np.float32)
    rr = rows * b + flat_idx // b
    cc = cols * b + flat_idx % b
    new_rgb = rgb[rr, cc]
    new_rgb[~new_valid] = 0
    return new_depth, new_rgb, new_valid


def load_view_stack(view_dir, resolution: int) -> np.ndarray:
    """The 8 views of a directory as one (5, 8*res, res) float32 array.

    Channels: normalized depth, r, g, b (each 0 on background), validity.
    Views are concatenated vertically in rig order.
    """
    rows = []
    for n in range(N_VIEWS):
        depth = formats.read_fmap(Path(view_dir) / formats.depth_name(n))
        rgb, valid = formats.read_texture(Path(view_dir) / formats.texture_name(n))
        if depth.shape[0] != resolution:
            depth, rgb, valid = downsample_view(depth, rgb, valid, resolution)
        rows.append(
            np.concatenate(
                [
                    depth[None] / DEPTH_SCALE,
                    rgb.transpose(2, 0, 1) / 255.0,
                    valid[None].astype(np.float32),
                ]
            )
        )
    return np.concatenate(rows, axis=1).astype(np.float32)


def load_nocs_pair(render_dir, resolution: int):
    """(rgb input (3,res,res), nocs target (4,res,res)) for the 2D-3D net.

    The coordinate target keeps the raster's (x, y, z, mask) channels with
    background coordinates zeroed.
    """
    render_dir = Path(render_dir)
    nocs = formats.read_fmap(render_dir / "nocs.fmap")
    rgb, rgb_valid = formats.read_texture(render_dir / "input_texture.png")
    mask = nocs[..., 3] >= 0.5
    depth_proxy = mask.astype(np.float32)  # reuse the block-reduce machinery
    if nocs.shape[0] != resolution:
        coords = nocs[..., :3]
        d, coords_small, m = downsample_view(depth_proxy, coords, mask, resolution)
        _, rgb_small, _ = downsample_view(depth_proxy, rgb, mask, resolution)
        mask = m
        coords = np.where(mask[..., None], coords_small, 0.0)
        rgb = np.where(mask[..., None], rgb_small, 0)
    else:
        coords = np.where(mask[..., None], nocs[..., :3], 0.0)
        rgb = np.where((mask & rgb_valid)[..., None], rgb, 0)
    target = np.concatenate(
        [coords.transpose(2, 0, 1), mask[None].astype(np.float32)]
    ).astype(np.float32)
    inputs = (rgb.transpose(2, 0, 1) / 255.0).astype(np.float32)
    return inputs, target


@dataclass
class CompletionDataset:
    """Aligned (partial view stack, GT view stack) pairs for completion nets."""

    inputs: list[np.ndarray] = field(default_factory=list)
    targets: list[np.ndarray] = field(default_factory=list)

    def add_object(self, obj: ObjectPaths, resolution: int) -> None:
        self.inputs.append(load_view_stack(obj.partial_views, resolution))
        self.targets.append(load_view_stack(obj.render_dir, resolution))

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass
class NocsDataset:
    """(RGB image, object-coordinate image) pairs for the 2D-3D net."""

    inputs: list[np.ndarray] = field(default_factory=list)
    targets: list[np.ndarray] = field(default_factory=list)
    object_ids: list[int] = field(default_factory=list)

    def add_pair(self, render_dir, resolution: int, object_id: int = 0) -> None:
        x, y = load_nocs_pair(render_dir, resolution)
        self.inputs.append(x)
        self.targets.append(y)
        self.object_ids.append(object_id)

    def __len__(self) -> int:
        return len(self.inputs)

"""Command line pipeline: render -> reconstruct (map/project/complete/fuse) -> eval.

Exit codes: 0 success, 2 input error, 3 format error, 4 numeric or
degenerate failure. Configuration precedence: command-line flags override
`--config` file entries, which override built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import completion, fileio, fusion, metrics
from .camera import Camera, DEFAULT_INTRINSICS, Intrinsics, look_at, make_view_rig
from .cloud import ColoredPointCloud
from .dataset import load_obj, random_view_camera, render_nocs_image, sample_mesh
from .projection import (
    ProjectionConfig,
    ViewSet,
    joint_project,
    joint_texture_shape_mapping,
    load_view_set,
    project_view,
    save_view_set,
)
from .rasters import NocsImage

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4

_CONFIG_TYPES = {
    "points": int,
    "seed": int,
    "upsample": int,
    "threads": int,
    "vote_threshold": int,
    "min_neighbors": int,
    "radius": float,
    "vote_tol": float,
    "distance": float,
    "no_voting": None,  # boolean
    "no_radius_filter": None,
    "icp": None,
    "json": None,
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_config(path) -> dict:
    try:
        raw = fileio.read_manifest(path)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read config: {exc}") from exc
    out = {}
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest not in _CONFIG_TYPES:
            raise CliError(EXIT_INPUT, f"unknown config key {key!r}")
        conv = _CONFIG_TYPES[dest]
        if conv is None:
            out[dest] = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            try:
                out[dest] = conv(value)
            except ValueError:
                raise CliError(EXIT_INPUT, f"bad config value for {key}: {value!r}") from None
    return out


def _add_fusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-voting", action="store_true", help="disable the voting filter")
    p.add_argument(
        "--no-radius-filter", action="store_true", help="disable radius outlier removal"
    )
    p.add_argument("--vote-threshold", type=int, default=5)
    p.add_argument("--vote-tol", type=float, default=0.01)
    p.add_argument("--radius", type=float, default=0.012)
    p.add_argument("--min-neighbors", type=int, default=6)


def _fusion_config(args) -> fusion.FusionConfig:
    try:
        return fusion.FusionConfig(
            vote_threshold=args.vote_threshold,
            vote_depth_tolerance=args.vote_tol,
            radius=args.radius,
            min_neighbors=args.min_neighbors,
            enable_voting=not args.no_voting,
            enable_radius_filter=not args.no_radius_filter,
        )
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvrecon", description="Multi-view point cloud reconstruction pipeline"
    )
    parser.add_argument("--config", help="key = value configuration file")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = {}

    p = parser.subcommands["render"] = sub.add_parser("render", help="render GT views, NOCS image, and cloud from a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--points", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--upsample", type=int, default=50)
    p.add_argument("--distance", type=float, default=2.0)
    p.add_argument("--input-view", help="input camera position as x,y,z")
    p.add_argument("--random-view", type=int, metavar="SEED",
                   help="sample the input camera on the distance sphere")
    p.add_argument("--threads", type=int, default=1)

    p = parser.subcommands["reconstruct"] = sub.add_parser("reconstruct", help="partial cloud -> views -> completion -> fused cloud")
    p.add_argument("--rgb", required=True, help="input texture image (PNG)")
    p.add_argument("--nocs", required=True, help="object-coordinate image (.fmap)")
    p.add_argument("--completer", default="identity",
                   help="identity | fill:<iters> | external:<dir>")
    p.add_argument("--out", required=True)
    p.add_argument("--upsample", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    _add_fusion_flags(p)

    p = parser.subcommands["fuse"] = sub.add_parser("fuse", help="fuse a view directory into a PLY cloud")
    p.add_argument("--views", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    _add_fusion_flags(p)

    p = parser.subcommands["eval"] = sub.add_parser("eval", help="compare a predicted cloud against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--icp", action="store_true")
    p.add_argument("--json", action="store_true")

    return parser


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(EXIT_INPUT, f"cannot read {what}: {p}")
    return p


def _manifest_entries(intrinsics: Intrinsics, distance: float, upsample: int) -> dict:
    return {
        "distance": distance,
        "f": intrinsics.f,
        "cx": intrinsics.cx,
        "cy": intrinsics.cy,
        "width": intrinsics.width,
        "height": intrinsics.height,
        "upsample": upsample,
    }


def _rig_from_manifest(dirpath):
    manifest = Path(dirpath) / "manifest.txt"
    if not manifest.exists():
        return make_view_rig(), 2.0
    entries = fileio.read_manifest(manifest)
    intr = Intrinsics(
        f=float(entries.get("f", DEFAULT_INTRINSICS.f)),
        cx=float(entries.get("cx", DEFAULT_INTRINSICS.cx)),
        cy=float(entries.get("cy", DEFAULT_INTRINSICS.cy)),
        width=int(entries.get("width", DEFAULT_INTRINSICS.width)),
        height=int(entries.get("height", DEFAULT_INTRINSICS.height)),
    )
    distance = float(entries.get("distance", 2.0))
    return make_view_rig(distance=distance, intrinsics=intr), distance


def cmd_render(args) -> int:
    mesh_path = _require_file(args.mesh, "mesh")
    mesh = load_obj(mesh_path)
    dense = sample_mesh(mesh, n=args.points, seed=args.seed)
    rig = make_view_rig(distance=args.distance)
    views = joint_project(
        dense, rig, ProjectionConfig(upsample=args.upsample), threads=args.threads
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_view_set(
        views, out, _manifest_entries(DEFAULT_INTRINSICS, args.distance, args.upsample)
    )
    fileio.write_ply(dense, out / "gt_cloud.ply")

    if args.input_view is not None and args.random_view is not None:
        raise CliError(EXIT_INPUT, "give either --input-view or --random-view, not both")
    if args.random_view is not None:
        input_camera = random_view_camera(args.random_view, distance=args.distance)
    else:
        if args.input_view is not None:
            try:
                eye = np.array([float(t) for t in args.input_view.split(",")])
            except ValueError:
                raise CliError(EXIT_INPUT, f"bad --input-view {args.input_view!r}") from None
            if eye.shape != (3,):
                raise CliError(EXIT_INPUT, "--input-view needs exactly 3 components")
        else:
            eye = args.distance * np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
        input_camera = Camera(intrinsics=DEFAULT_INTRINSICS, pose=look_at(eye, (0.0, 0.0, 0.0)))
    nocs = render_nocs_image(dense, input_camera, upsample=args.upsample)
    fileio.write_raster(nocs, out / "nocs.fmap")
    input_view, _ = project_view(
        dense, input_camera, ProjectionConfig(upsample=args.upsample)
    )
    fileio.write_texture(input_view.texture, out / "input_texture.png")
    eye = input_camera.pose.center()
    fileio.write_manifest(
        out / "manifest.txt",
        _manifest_entries(DEFAULT_INTRINSICS, args.distance, args.upsample)
        | {"input_eye": f"{eye[0]},{eye[1]},{eye[2]}"},
    )
    print(f"rendered 8 views + nocs + gt cloud ({len(dense)} points) to {out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    rgb_path = _require_file(args.rgb, "rgb")
    nocs_path = _require_file(args.nocs, "nocs")
    texture = fileio.read_texture(rgb_path)
    nocs = fileio.read_raster(nocs_path)
    if not isinstance(nocs, NocsImage):
        raise CliError(EXIT_FORMAT, f"{nocs_path} is not an object-coordinate image")
    if texture.shape != nocs.shape:
        raise CliError(EXIT_INPUT, "rgb and nocs images differ in size")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    partial = joint_texture_shape_mapping(texture, nocs)
    fileio.write_ply(partial, out / "partial.ply")

    rig = make_view_rig()
    cfg = ProjectionConfig(upsample=args.upsample)
    views = joint_project(partial, rig, cfg, threads=args.threads)
    views_dir = out / "views"
    save_view_set(
        views, views_dir, _manifest_entries(DEFAULT_INTRINSICS, 2.0, args.upsample)
    )

    try:
        spec = completion.parse_completer(args.completer)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc

    fusion_cfg = _fusion_config(args)
    if spec.kind == "identity":
        completed = completion.complete_identity(views)
        fused = fusion.fuse_and_filter(None, None, rig, fusion_cfg, joint=True,
                                       views=list(completed.views))
        fileio.write_ply(fused, out / "fused.ply")
    elif spec.kind == "fill":
        completed = completion.complete_baseline_fill(views, spec.iterations)
        fused = fusion.fuse_and_filter(None, None, rig, fusion_cfg, joint=True,
                                       views=list(completed.views))
        fileio.write_ply(fused, out / "fused.ply")
    else:
        ext_dir = _require_file(spec.directory, "completion directory")
        mode = completion.detect_external_mode(ext_dir)
        if mode == completion.MODE_MTDCN:
            completed = completion.complete_external(ext_dir, mode, views.shape)
            fused = fusion.fuse_and_filter(None, None, rig, fusion_cfg, joint=True,
                                           views=list(completed.views))
            fileio.write_ply(fused, out / "fused.ply")
        else:
            depths = completion.complete_external(ext_dir, mode, views.shape)
            shape_only, _ = fusion.fuse_mdcn(depths, views.textures(), rig)
            fileio.write_ply(
                ColoredPointCloud(positions=shape_only.positions), out / "fused_d.ply"
            )
            fused = fusion.fuse_and_filter(depths, views.textures(), rig, fusion_cfg,
                                           joint=False)
            fileio.write_ply(fused, out / "fused.ply")
    print(f"partial {len(partial)} points -> fused {len(fused)} points in {out}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    views_dir = _require_file(args.views, "view directory")
    views = load_view_set(views_dir)
    rig, _ = _rig_from_manifest(views_dir)
    cfg = _fusion_config(args)
    fused = fusion.fuse_and_filter(None, None, rig, cfg, joint=True, views=list(views.views))
    fileio.write_ply(fused, args.out)
    print(f"fused {len(fused)} points to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = fileio.read_ply(_require_file(args.pred, "predicted cloud"))
    gt = fileio.read_ply(_require_file(args.gt, "ground-truth cloud"))
    report = metrics.eval_report(pred, gt, with_icp=args.icp)
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        line = f"cd = {report.cd:.6f}"
        if report.cd_after_icp is not None:
            line += (
                f", cd_after_icp = {report.cd_after_icp:.6f}"
                f", relative_improvement = {report.relative_improvement:.4f}"
            )
        print(line)
    return EXIT_OK


_COMMANDS = {
    "render": cmd_render,
    "reconstruct": cmd_reconstruct,
    "fuse": cmd_fuse,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            overrides = _load_config(known.config)
            parser.set_defaults(**overrides)
            # Subcommands parse into their own namespace, so defaults must be
            # pushed onto each subparser as well.
            for sp in parser.subcommands.values():
                sp.set_defaults(**overrides)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except fileio.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

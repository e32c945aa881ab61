"""Dense textured point cloud reconstruction via multi-view depth fusion."""

from .camera import (
    Camera,
    DEFAULT_INTRINSICS,
    Intrinsics,
    Pose,
    ViewRig,
    look_at,
    make_view_rig,
)
from .cloud import ColoredPointCloud
from .rasters import DepthMap, IndexMap, NocsImage, TextureDepthMap, TextureImage
from .projection import (
    ProjectionConfig,
    ViewSet,
    joint_project,
    joint_texture_shape_mapping,
    project_view,
)
from .fusion import (
    FusionConfig,
    back_project,
    fuse_mdcn,
    fuse_mtdcn,
    radius_filter,
    voting_filter,
)
from .metrics import EvalReport, chamfer_distance, eval_report, icp_align

__version__ = "0.1.0"

__all__ = [
    "Camera",
    "ColoredPointCloud",
    "DEFAULT_INTRINSICS",
    "DepthMap",
    "EvalReport",
    "FusionConfig",
    "IndexMap",
    "Intrinsics",
    "NocsImage",
    "Pose",
    "ProjectionConfig",
    "TextureDepthMap",
    "TextureImage",
    "ViewRig",
    "ViewSet",
    "back_project",
    "chamfer_distance",
    "eval_report",
    "fuse_mdcn",
    "fuse_mtdcn",
    "icp_align",
    "joint_project",
    "joint_texture_shape_mapping",
    "look_at",
    "make_view_rig",
    "project_view",
    "radius_filter",
    "voting_filter",
]

import numpy as np
import pytest

from mvrecon.camera import make_view_rig
from mvrecon.cloud import ColoredPointCloud
from mvrecon.dataset import TriangleMesh


@pytest.fixture(scope="session")
def rig():
    return make_view_rig()


def plate_mesh(extent: float = 0.4) -> TriangleMesh:
    """Thin square plate in the z=0 plane; visible from all 8 rig views."""
    e = extent
    vertices = np.array(
        [[-e, -e, 0.0], [e, -e, 0.0], [e, e, 0.0], [-e, e, 0.0]]
    )
    triangles = np.array([[0, 1, 2], [0, 2, 3]])
    colors = np.array(
        [[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 0]], dtype=np.uint8
    )
    return TriangleMesh(vertices=vertices, triangles=triangles, colors=colors)


def write_obj(path, mesh: TriangleMesh) -> None:
    with open(path, "w") as fh:
        for i, v in enumerate(mesh.vertices):
            if mesh.colors is not None:
                c = mesh.colors[i] / 255.0
                fh.write(f"v {v[0]} {v[1]} {v[2]} {c[0]} {c[1]} {c[2]}\n")
            else:
                fh.write(f"v {v[0]} {v[1]} {v[2]}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def random_sphere_cloud(n: int, seed: int, radius: float = 0.5, colored: bool = True):
    """Uniform points inside the given sphere, optionally with random colors."""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / 3.0)
    positions = direction * r[:, None]
    colors = rng.integers(0, 256, (n, 3), dtype=np.uint8) if colored else None
    return ColoredPointCloud(positions=positions, colors=colors)


def project_view_oracle(cloud, camera, upsample):
    """Literal depth-pooling procedure: materialize the (U*H, U*W) buffer per
    point, then min-pool with stride U, breaking depth ties by lowest index.

    Returns (depth (H,W) float32, index (H,W) int32).
    """
    k = camera.intrinsics
    h, w, u_factor = k.height, k.width, upsample
    hr_depth = np.full((h * u_factor, w * u_factor), np.inf)
    hr_index = np.full((h * u_factor, w * u_factor), np.iinfo(np.int64).max)
    cam = camera.pose.apply(cloud.positions)
    for i in range(len(cloud)):
        x, y, z = cam[i]
        if z <= 0:
            continue
        u = k.f * x / z + k.cx
        v = k.f * y / z + k.cy
        if not (0 <= u < w and 0 <= v < h):
            continue
        cu = int(np.floor(u * u_factor))
        cv = int(np.floor(v * u_factor))
        if z < hr_depth[cv, cu]:
            hr_depth[cv, cu] = z
            hr_index[cv, cu] = i
    d4 = hr_depth.reshape(h, u_factor, w, u_factor)
    i4 = hr_index.reshape(h, u_factor, w, u_factor)
    pooled = d4.min(axis=(1, 3))
    tied = np.where(d4 == pooled[:, None, :, None], i4, np.iinfo(np.int64).max)
    winner = tied.min(axis=(1, 3))
    valid = np.isfinite(pooled)
    depth = np.where(valid, pooled, 0.0).astype(np.float32)
    index = np.where(valid, winner, -1).astype(np.int32)
    return depth, index

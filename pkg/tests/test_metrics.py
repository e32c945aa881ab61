import numpy as np
import pytest

from conftest import random_sphere_cloud

from mvrecon.metrics import (
    EvalReport,
    best_rigid_transform,
    chamfer_distance,
    eval_report,
    icp_align,
)


def _rotation(axis, degrees):
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    theta = np.radians(degrees)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(theta) * k + (1 - np.cos(theta)) * (k @ k)


def _chamfer_bruteforce(a, b):
    d_ab = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2).min(axis=1)
    d_ba = np.linalg.norm(b[:, None, :] - a[None, :, :], axis=2).min(axis=1)
    return 100.0 * (np.mean(d_ab**2) + np.mean(d_ba**2))


class TestChamfer:
    def test_identical_clouds_zero(self):
        cloud = random_sphere_cloud(500, seed=1, colored=False)
        assert chamfer_distance(cloud, cloud) == 0.0

    def test_two_point_arithmetic(self):
        a = np.array([[0.0, 0.0, 0.0]])
        b = np.array([[0.1, 0.0, 0.0]])
        assert chamfer_distance(a, b) == pytest.approx(2.0, rel=1e-12)

    def test_matches_bruteforce(self):
        for seed in range(10):
            a = random_sphere_cloud(100, seed=seed, colored=False).positions
            b = random_sphere_cloud(100, seed=seed + 100, colored=False).positions
            fast = chamfer_distance(a, b)
            slow = _chamfer_bruteforce(a, b)
            assert fast == pytest.approx(slow, rel=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.random((50, 3))
            b = rng.random((60, 3))
            assert chamfer_distance(a, b) == chamfer_distance(b, a)

    def test_positive_when_different(self):
        a = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        b = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 1e-6]])
        assert chamfer_distance(a, b) > 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            chamfer_distance(np.zeros((0, 3)), np.zeros((5, 3)))


class TestIcp:
    def test_identity_on_equal_clouds(self):
        cloud = random_sphere_cloud(300, seed=3, colored=False).positions
        result = icp_align(cloud, cloud)
        assert np.allclose(result.transform.rotation, np.eye(3), atol=1e-9)
        assert np.allclose(result.transform.translation, 0, atol=1e-9)

    def test_recovers_known_transform(self):
        tgt = random_sphere_cloud(2000, seed=4, colored=False).positions
        rot = _rotation([0, 0, 1], 10.0)
        src = tgt @ rot.T + np.array([0.05, 0.0, 0.0])
        result = icp_align(src, tgt)
        # recovered transform should invert the applied one
        recovered = result.transform.rotation
        err_deg = np.degrees(
            np.arccos(np.clip((np.trace(recovered @ rot) - 1) / 2, -1, 1))
        )
        assert err_deg < 1.0
        aligned_err = np.linalg.norm(result.aligned - tgt, axis=1).max()
        assert aligned_err < 1e-3

    def test_objective_non_increasing(self):
        src = random_sphere_cloud(500, seed=5, colored=False).positions
        tgt = random_sphere_cloud(500, seed=6, colored=False).positions
        result = icp_align(src, tgt)
        hist = np.array(result.rmse_history)
        assert result.n_iterations <= 100
        assert (np.diff(hist) <= 1e-12).all()

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            icp_align(np.zeros((2, 3)), np.zeros((5, 3)))

    def test_degenerate_covariance(self):
        src = np.array([[0, 0, 0], [1e-15, 0, 0], [0, 1e-15, 0], [0, 0, 1e-15]])
        dst = np.zeros((4, 3))
        with pytest.raises(ValueError, match="degenerate"):
            best_rigid_transform(src, dst)

    def test_best_transform_is_exact_on_clean_pairs(self):
        rng = np.random.default_rng(7)
        src = rng.random((100, 3))
        rot = _rotation([1, 2, 3], 25.0)
        dst = src @ rot.T + np.array([0.1, -0.2, 0.3])
        t = best_rigid_transform(src, dst)
        assert np.allclose(t.apply(src), dst, atol=1e-12)


class TestEvalReport:
    def test_pred_equals_gt(self):
        cloud = random_sphere_cloud(200, seed=8, colored=False).positions
        report = eval_report(cloud, cloud, with_icp=True)
        assert report.cd == 0.0
        assert report.relative_improvement == 0.0

    def test_misaligned_pair_improves(self):
        tgt = random_sphere_cloud(1000, seed=9, colored=False).positions
        src = tgt @ _rotation([0, 1, 0], 15.0).T + np.array([0.03, 0, 0])
        report = eval_report(src, tgt, with_icp=True)
        assert report.cd > 0
        assert report.relative_improvement > 0
        assert report.relative_improvement <= 1

    def test_without_icp(self):
        a = random_sphere_cloud(100, seed=10, colored=False).positions
        report = eval_report(a, a, with_icp=False)
        assert report.cd_after_icp is None
        assert report.relative_improvement is None
        assert "cd_after_icp" not in report.to_dict()

    def test_counts_and_runtime(self):
        a = random_sphere_cloud(100, seed=11, colored=False).positions
        b = random_sphere_cloud(150, seed=12, colored=False).positions
        report = eval_report(a, b)
        assert (report.n_pred, report.n_gt) == (100, 150)
        assert report.runtime_seconds >= 0


def test_kdtree_nn_matches_bruteforce():
    from scipy.spatial import cKDTree

    rng = np.random.default_rng(13)
    pts = rng.random((1000, 3))
    queries = rng.random((1000, 3))
    d_tree, i_tree = cKDTree(pts).query(queries)
    dist = np.linalg.norm(queries[:, None, :] - pts[None, :, :], axis=2)
    assert np.array_equal(i_tree, dist.argmin(axis=1))
    assert np.allclose(d_tree, dist.min(axis=1), rtol=1e-12)

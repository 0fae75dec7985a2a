import numpy as np
import pytest

from zeroreg.errors import DegenerateConfigError, InsufficientDataError
from zeroreg.point_match import PointCorrespondences
from zeroreg.registration import (
    RansacConfig,
    RigidTransform,
    apply_transform,
    fit_rigid,
    ransac_register,
)

from conftest import random_rotation, rot_z


def _corr(src, dst):
    n = len(src)
    return PointCorrespondences(
        pairs=np.stack([np.arange(n), np.arange(n)], axis=1),
        confidence=np.ones(n),
        source_points=np.asarray(src, float),
        target_points=np.asarray(dst, float),
        region_ids=np.zeros(n, np.int64),
    )


def test_fit_identity():
    rng = np.random.default_rng(0)
    p = rng.normal(size=(10, 3))
    T = fit_rigid(p, p)
    np.testing.assert_allclose(T.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(T.translation, np.zeros(3), atol=1e-12)


def test_fit_recovers_known_transform():
    p = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    R = rot_z(90.0)
    t = np.array([1.0, 2.0, 3.0])
    q = p @ R.T + t
    T = fit_rigid(p, q)
    np.testing.assert_allclose(T.rotation, R, atol=1e-9)
    np.testing.assert_allclose(T.translation, t, atol=1e-9)


def test_fit_reflection_corrected():
    rng = np.random.default_rng(1)
    p = rng.normal(size=(8, 3))
    T = fit_rigid(p, -p)
    assert np.linalg.det(T.rotation) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(T.rotation.T @ T.rotation, np.eye(3), atol=1e-9)


def test_fit_too_few_pairs():
    with pytest.raises(InsufficientDataError):
        fit_rigid(np.zeros((2, 3)), np.zeros((2, 3)))


def test_fit_collinear_degenerate():
    p = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3.0, 0, 0]])
    with pytest.raises(DegenerateConfigError):
        fit_rigid(p, p)


def test_fit_translation_equivariance():
    rng = np.random.default_rng(4)
    p = rng.normal(size=(12, 3))
    q = p @ rot_z(30).T + np.array([0.1, -0.2, 0.3])
    shift = np.array([5.0, -7.0, 2.0])
    T1 = fit_rigid(p, q)
    T2 = fit_rigid(p + shift, q + shift)
    np.testing.assert_allclose(T1.rotation, T2.rotation, atol=1e-9)
    np.testing.assert_allclose(T2.translation, T1.translation + shift - T1.rotation @ shift, atol=1e-9)


def test_fit_local_optimality():
    rng = np.random.default_rng(5)
    p = rng.normal(size=(15, 3))
    q = p @ random_rotation(rng).T + rng.normal(size=3) + 0.01 * rng.normal(size=(15, 3))
    T = fit_rigid(p, q)
    base = np.sum((T.apply(p) - q) ** 2)
    for _ in range(50):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-0.05, 0.05)
        K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        dR = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
        perturbed = RigidTransform(rotation=dR @ T.rotation, translation=T.translation + rng.uniform(-0.02, 0.02, 3))
        assert np.sum((perturbed.apply(p) - q) ** 2) >= base - 1e-12


def test_apply_transform_identity_and_translation():
    pts = np.array([[0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(apply_transform(RigidTransform.identity(), pts), pts)
    T = RigidTransform(rotation=np.eye(3), translation=np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(apply_transform(T, pts), [[0, 0, 1.0]])


def test_compose_inverse_round_trip():
    rng = np.random.default_rng(9)
    T = RigidTransform(rotation=random_rotation(rng), translation=rng.normal(size=3))
    pts = rng.normal(size=(20, 3))
    round_trip = T.compose(T.inverse()).apply(pts)
    np.testing.assert_allclose(round_trip, pts, atol=1e-9)


def test_row12_round_trip():
    rng = np.random.default_rng(2)
    T = RigidTransform(rotation=random_rotation(rng), translation=rng.normal(size=3))
    T2 = RigidTransform.from_row12(T.to_row12())
    np.testing.assert_allclose(T2.rotation, T.rotation, atol=1e-15)
    np.testing.assert_allclose(T2.translation, T.translation, atol=1e-15)


def test_ransac_noise_free():
    rng = np.random.default_rng(3)
    p = rng.uniform(-1, 1, size=(100, 3))
    R = random_rotation(rng)
    t = rng.normal(size=3)
    res = ransac_register(_corr(p, p @ R.T + t), RansacConfig(seed=1))
    np.testing.assert_allclose(res.transform.rotation, R, atol=1e-6)
    np.testing.assert_allclose(res.transform.translation, t, atol=1e-6)
    assert len(res.inlier_indices) == 100


def test_ransac_with_outliers():
    rng = np.random.default_rng(1)
    n_in, n_out = 50, 50
    p_in = rng.uniform(-1, 1, size=(n_in, 3))
    R = random_rotation(rng)
    t = rng.normal(size=3)
    q_in = p_in @ R.T + t + 0.005 * rng.normal(size=(n_in, 3))
    p_out = rng.uniform(-1, 1, size=(n_out, 3))
    q_out = rng.uniform(-1, 1, size=(n_out, 3))
    src = np.vstack([p_in, p_out])
    dst = np.vstack([q_in, q_out])
    res = ransac_register(_corr(src, dst), RansacConfig(seed=1))
    tr = float(np.trace(R.T @ res.transform.rotation))
    angle = np.degrees(np.arccos(np.clip((tr - 1) / 2, -1, 1)))
    assert angle < 1.0
    assert np.linalg.norm(res.transform.translation - t) < 0.02


def test_ransac_three_exact_pairs_equals_fit():
    p = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    q = p @ rot_z(45).T + np.array([0.5, 0, 0])
    res = ransac_register(_corr(p, q), RansacConfig(seed=0))
    ref = fit_rigid(p, q)
    np.testing.assert_allclose(res.transform.rotation, ref.rotation, atol=1e-9)
    np.testing.assert_allclose(res.transform.translation, ref.translation, atol=1e-9)


def test_ransac_reproducible():
    rng = np.random.default_rng(8)
    p = rng.uniform(-1, 1, size=(40, 3))
    q = p @ rot_z(20).T + 0.003 * rng.normal(size=(40, 3))
    a = ransac_register(_corr(p, q), RansacConfig(seed=7))
    b = ransac_register(_corr(p, q), RansacConfig(seed=7))
    np.testing.assert_array_equal(a.transform.rotation, b.transform.rotation)
    np.testing.assert_array_equal(a.inlier_indices, b.inlier_indices)
    assert a.iterations_run == b.iterations_run


def test_ransac_too_few():
    with pytest.raises(InsufficientDataError):
        ransac_register(_corr(np.zeros((2, 3)), np.zeros((2, 3))))


def test_ransac_inlier_invariant():
    rng = np.random.default_rng(12)
    p = rng.uniform(-1, 1, size=(60, 3))
    q = p @ rot_z(10).T + 0.01 * rng.normal(size=(60, 3))
    cfg = RansacConfig(seed=3)
    res = ransac_register(_corr(p, q), cfg)
    resid = np.linalg.norm(res.transform.apply(p[res.inlier_indices]) - q[res.inlier_indices], axis=1)
    assert (resid <= cfg.inlier_threshold).all()

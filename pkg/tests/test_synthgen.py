import numpy as np
import pytest
from scipy.spatial import cKDTree

from zeroreg.bundle import CameraIntrinsics, CameraPose, bundles_equal, read_bundle, validate_bundle
from zeroreg.errors import EmptyRenderError, GenerationError
from zeroreg.projection import back_project
from zeroreg.synthgen import (
    SceneSpec,
    default_suite_spec,
    generate_pair,
    generate_suite,
    read_ground_truth,
    render_depth,
    sample_scene_spec,
)

from conftest import unit


def _spec(**kw):
    base = dict(object_count=4, points_per_object=300, view_count=3, overlap_ratio=1.0, seed=5)
    base.update(kw)
    return SceneSpec(**base)


def test_deterministic_bundles(tmp_path):
    a_src, a_tgt, _ = generate_pair(_spec(seed=42))
    b_src, b_tgt, _ = generate_pair(_spec(seed=42))
    assert bundles_equal(a_src, b_src)
    assert bundles_equal(a_tgt, b_tgt)


def test_bundles_validate():
    src, tgt, _ = generate_pair(_spec(depth_noise_sigma=0.005, outlier_mask_count=2))
    validate_bundle(src)
    validate_bundle(tgt)


def test_duplicates_share_prototype():
    src, _, _ = generate_pair(_spec(object_count=3, duplicates_per_category=3, semantic_noise_sigma=0.05))
    labels = {m.category_label for m in src.masks if m.mask_id < 3}
    assert len(labels) == 1
    vecs = [np.asarray(f.vector, float) for f in src.semantic_features]
    for a in vecs:
        for b in vecs:
            cos = float(unit(a) @ unit(b))
            assert cos >= 0.9


def test_ground_truth_consistency():
    spec = _spec(depth_noise_sigma=0.003)
    _, _, gt = generate_pair(spec)
    src = gt.source_keypoints[[a for a, _ in gt.point_pairs]]
    tgt = gt.target_keypoints[[b for _, b in gt.point_pairs]]
    err = np.linalg.norm(gt.transform.apply(src) - tgt, axis=1)
    assert err.max() <= 3 * spec.depth_noise_sigma + 1e-3


def test_semantic_sigma_does_not_move_geometry():
    a_src, a_tgt, a_gt = generate_pair(_spec(semantic_noise_sigma=0.01))
    b_src, b_tgt, b_gt = generate_pair(_spec(semantic_noise_sigma=0.3))
    for fa, fb in zip(a_src.frames, b_src.frames):
        assert np.array_equal(fa.depth, fb.depth)
    for ma, mb in zip(a_src.masks, b_src.masks):
        assert np.array_equal(ma.mask, mb.mask)
    for ga, gb in zip(a_src.geometric, b_src.geometric):
        assert np.array_equal(ga.pixels, gb.pixels)
    assert not all(
        np.array_equal(fa.vector, fb.vector)
        for fa, fb in zip(a_src.semantic_features, b_src.semantic_features)
    )
    np.testing.assert_array_equal(a_gt.overlap_points, b_gt.overlap_points)


def test_paired_objects_share_labels():
    src, tgt, gt = generate_pair(_spec(overlap_ratio=0.6, object_count=5))
    src_label = {m.mask_id: m.category_label for m in src.masks}
    tgt_label = {m.mask_id: m.category_label for m in tgt.masks}
    for a, b in gt.object_pairs:
        assert src_label[a] == tgt_label[b]


def test_overlap_ratio_controls_shared_objects():
    _, _, gt_full = generate_pair(_spec(object_count=6, overlap_ratio=1.0))
    _, _, gt_half = generate_pair(_spec(object_count=6, overlap_ratio=0.5))
    assert len(gt_full.object_pairs) >= len(gt_half.object_pairs)
    assert len(gt_half.overlap_points) == 3 * 300


def test_invalid_spec_rejected():
    with pytest.raises(GenerationError):
        SceneSpec(object_count=0)
    with pytest.raises(GenerationError):
        SceneSpec(overlap_ratio=0.0)
    with pytest.raises(GenerationError):
        SceneSpec(depth_noise_sigma=-1.0)


def _camera():
    intr = CameraIntrinsics(fx=2000.0, fy=2000.0, cx=320.0, cy=240.0, width=640, height=480)
    pose = CameraPose(rotation=np.eye(3), translation=np.zeros(3))
    return intr, pose


def test_render_single_point_on_axis():
    intr, pose = _camera()
    frame = render_depth(np.array([[0.0, 0.0, 2.0]]), intr, pose)
    assert frame.depth[240, 320] == pytest.approx(2.0, abs=1e-4)
    assert (frame.depth > 0).sum() == 1


def test_render_zbuffer_near_wins():
    intr, pose = _camera()
    frame = render_depth(np.array([[0.0, 0.0, 3.0], [0.0, 0.0, 2.0]]), intr, pose)
    assert frame.depth[240, 320] == pytest.approx(2.0, abs=1e-4)


def test_render_empty_raises():
    intr, pose = _camera()
    with pytest.raises(EmptyRenderError):
        render_depth(np.array([[0.0, 0.0, -1.0]]), intr, pose)


def test_render_back_project_round_trip():
    # narrow-FOV camera keeps the half-pixel ray error below 1e-3 m
    rng = np.random.default_rng(0)
    intr, pose = _camera()
    pts = np.stack(
        [rng.uniform(-0.2, 0.2, 200), rng.uniform(-0.15, 0.15, 200), rng.uniform(1.5, 3.0, 200)],
        axis=1,
    )
    frame = render_depth(pts, intr, pose)
    vs, us = np.nonzero(frame.depth > 0)
    recon, dropped = back_project(frame, np.stack([us, vs], axis=1))
    assert not dropped
    d, _ = cKDTree(pts).query(recon)
    assert d.max() < 1e-3


def test_generate_suite_layout(tmp_path):
    suite = default_suite_spec()
    suite["object_count"] = [3, 4]
    dirs = generate_suite(tmp_path, suite, pairs=2)
    assert len(dirs) == 2
    for d in dirs:
        bundle = read_bundle(d / "source")
        assert bundle.bundle_id.endswith("source")
        read_bundle(d / "target")
        gt = read_ground_truth(d)
        assert len(gt.transform.to_row12()) == 12
        assert gt.overlap_points.shape[1] == 3


def test_sample_scene_spec_deterministic():
    suite = default_suite_spec()
    a = sample_scene_spec(suite, 3)
    b = sample_scene_spec(suite, 3)
    assert a == b
    c = sample_scene_spec(suite, 4)
    assert a != c

"""Deterministic synthetic scene-bundle pairs with full ground truth.

Places labeled object point clusters in a room, renders pinhole depth views
with per-object masks on both sides of a planted rigid transform, and emits
semantic/geometric features whose noise streams are independent of the
geometry stream (changing a noise sigma never moves a point).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .bundle import (
    CameraIntrinsics,
    CameraPose,
    DepthFrame,
    GeometricDescriptorSet,
    ObjectMask,
    SceneBundle,
    SemanticFeature,
    write_bundle,
)
from .errors import EmptyRenderError, FormatError, GenerationError
from .registration import RigidTransform

CATEGORY_VOCAB = (
    "chair", "table", "sofa", "lamp", "shelf", "monitor",
    "plant", "cabinet", "bed", "desk", "rug", "mirror",
)

SEMANTIC_DIM = 32
GEOMETRIC_DIM = 16
DEPTH_QUANTUM = 1e-4
KEYPOINTS_PER_OBJECT = 40
MIN_MASK_PIXELS = 6

_INTRINSICS = CameraIntrinsics(fx=140.0, fy=140.0, cx=80.0, cy=60.0, width=160, height=120)


@dataclass
class SceneSpec:
    object_count: int = 5
    duplicates_per_category: int = 1
    points_per_object: int = 400
    view_count: int = 3
    overlap_ratio: float = 1.0
    semantic_noise_sigma: float = 0.05
    descriptor_noise_sigma: float = 0.02
    depth_noise_sigma: float = 0.0
    outlier_mask_count: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.object_count < 1:
            raise GenerationError("object_count must be >= 1")
        if self.view_count < 1:
            raise GenerationError("view_count must be >= 1")
        if not (0.0 < self.overlap_ratio <= 1.0):
            raise GenerationError("overlap_ratio must lie in (0, 1]")
        for name in ("semantic_noise_sigma", "descriptor_noise_sigma", "depth_noise_sigma"):
            if getattr(self, name) < 0:
                raise GenerationError(f"{name} must be >= 0")


@dataclass
class GroundTruth:
    transform: RigidTransform
    object_pairs: list[tuple[int, int]]
    point_pairs: list[tuple[int, int]]
    overlap_points: np.ndarray
    source_keypoints: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    target_keypoints: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _look_at(eye: np.ndarray, target: np.ndarray) -> CameraPose:
    """Camera-to-world pose with x right, y down, z forward (CV convention)."""
    fwd = _unit(target - eye)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(fwd @ up)) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    x_cam = _unit(np.cross(fwd, up))
    y_cam = np.cross(fwd, x_cam)
    rot = np.stack([x_cam, y_cam, fwd], axis=1)
    return CameraPose(rotation=rot, translation=eye.astype(np.float64))


def _project(points: np.ndarray, intr: CameraIntrinsics, pose: CameraPose):
    cam = (points - pose.translation) @ pose.rotation
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * cam[:, 0] / z + intr.cx
        v = intr.fy * cam[:, 1] / z + intr.cy
    return u, v, z


def _render(points: np.ndarray, intr: CameraIntrinsics, pose: CameraPose):
    """Z-buffered projection; returns (depth, owner point index per pixel)."""
    u, v, z = _project(points, intr, pose)
    ui = np.rint(u).astype(np.int64)
    vi = np.rint(v).astype(np.int64)
    ok = (z > 0.05) & (ui >= 0) & (ui < intr.width) & (vi >= 0) & (vi < intr.height)
    idx = np.nonzero(ok)[0]
    depth, owner = _kernels.zbuffer_min(ui[idx], vi[idx], z[idx], intr.height, intr.width)
    owner = np.where(owner >= 0, np.concatenate([idx, [-1]])[owner], -1)
    return depth, owner


def render_depth(points, intrinsics: CameraIntrinsics, pose: CameraPose, view_id: int = 0) -> DepthFrame:
    """Public z-buffer render; unhit pixels 0; depth quantized to 1e-4 m."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    depth, owner = _render(pts, intrinsics, pose)
    if not (owner >= 0).any():
        raise EmptyRenderError("no point projects into the view")
    depth = np.round(depth / DEPTH_QUANTUM) * DEPTH_QUANTUM
    return DepthFrame(
        depth=depth.astype(np.float32), intrinsics=intrinsics, pose=pose, view_id=view_id
    )


def _sample_object(rng: np.random.Generator, count: int) -> np.ndarray:
    """Surface point cluster for one object, centered at the origin."""
    kind = rng.integers(0, 3)
    if kind == 0:  # box surface
        half = rng.uniform(0.10, 0.30, size=3)
        face = rng.integers(0, 6, size=count)
        pts = rng.uniform(-1.0, 1.0, size=(count, 3))
        axis = face // 2
        sign = np.where(face % 2 == 0, 1.0, -1.0)
        pts[np.arange(count), axis] = sign
        pts *= half
        yaw = rng.uniform(0, 2 * np.pi)
        c, s = np.cos(yaw), np.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return pts @ rot.T
    if kind == 1:  # sphere surface
        radius = rng.uniform(0.10, 0.25)
        return _unit(rng.normal(size=(count, 3))) * radius
    sigma = rng.uniform(0.06, 0.15)  # blob
    return rng.normal(scale=sigma, size=(count, 3))


def _place_centers(rng: np.random.Generator, count: int) -> np.ndarray:
    centers = []
    for _ in range(count):
        for _attempt in range(200):
            cand = np.array(
                [rng.uniform(0.0, 2.4), rng.uniform(0.0, 2.4), rng.uniform(0.2, 1.2)]
            )
            if all(np.linalg.norm(cand - c) > 0.65 for c in centers):
                centers.append(cand)
                break
        else:
            raise GenerationError(f"cannot place {count} objects with required spacing")
    return np.stack(centers)


def _random_transform(rng: np.random.Generator) -> RigidTransform:
    axis = _unit(rng.normal(size=3))
    angle = rng.uniform(np.radians(15.0), np.radians(75.0))
    K = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    rot = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)
    t = rng.uniform(-0.8, 0.8, size=3)
    return RigidTransform(rotation=rot, translation=t)


def _camera_ring(rng: np.random.Generator, center: np.ndarray, count: int) -> list[CameraPose]:
    poses = []
    base = rng.uniform(0.0, 2 * np.pi)
    for i in range(count):
        ang = base + 2 * np.pi * i / count + rng.uniform(-0.25, 0.25)
        radius = 3.4 + rng.uniform(-0.3, 0.3)
        height = 1.3 + rng.uniform(-0.2, 0.5)
        eye = center + np.array([radius * np.cos(ang), radius * np.sin(ang), 0.0])
        eye[2] = height
        poses.append(_look_at(eye, center))
    return poses


def _build_side(
    *,
    side: str,
    points: np.ndarray,
    point_object: np.ndarray,
    object_labels: list[str],
    prototypes: dict[str, np.ndarray],
    keypoint_indices: np.ndarray,
    keypoint_descriptors: np.ndarray,
    poses: list[CameraPose],
    spec: SceneSpec,
    sem_rng: np.random.Generator,
    desc_rng: np.random.Generator,
    sensor_rng: np.random.Generator,
    outlier_rng: np.random.Generator,
    bundle_id: str,
):
    """Renders one side's views and assembles its SceneBundle.

    Returns (bundle, mask-count per object, set of keypoint positions seen).
    """
    intr = _INTRINSICS
    frames: list[DepthFrame] = []
    masks: list[ObjectMask] = []
    feats: list[SemanticFeature] = []
    geoms: list[GeometricDescriptorSet] = []
    object_mask_count = np.zeros(len(object_labels), dtype=np.int64)
    kp_seen: set[int] = set()

    for view_id, pose in enumerate(poses):
        depth, owner = _render(points, intr, pose)
        hit = owner >= 0
        if not hit.any():
            continue
        noise = sensor_rng.normal(size=int(hit.sum()))
        if spec.depth_noise_sigma > 0:
            depth[hit] = np.maximum(depth[hit] + spec.depth_noise_sigma * noise, DEPTH_QUANTUM)
        depth = np.round(depth / DEPTH_QUANTUM) * DEPTH_QUANTUM
        frames.append(
            DepthFrame(depth=depth.astype(np.float32), intrinsics=intr, pose=pose, view_id=view_id)
        )

        owner_obj = np.where(owner >= 0, point_object[np.maximum(owner, 0)], -1)
        for obj in range(len(object_labels)):
            mask = owner_obj == obj
            if mask.sum() < MIN_MASK_PIXELS:
                continue
            masks.append(
                ObjectMask(view_id=view_id, mask=mask, category_label=object_labels[obj], mask_id=obj)
            )
            vec = prototypes[object_labels[obj]] + spec.semantic_noise_sigma * sem_rng.normal(
                size=SEMANTIC_DIM
            )
            feats.append(
                SemanticFeature(
                    vector=_unit(vec).astype(np.float32), mask_ref=(view_id, obj)
                )
            )
            object_mask_count[obj] += 1

        # keypoints visible in this view: the keypoint itself wins its pixel;
        # float pixel coordinates must stay in bounds for the bundle contract
        u, v, z = _project(points[keypoint_indices], intr, pose)
        ui = np.rint(u).astype(np.int64)
        vi = np.rint(v).astype(np.int64)
        ok = (z > 0.05) & (u >= 0) & (u <= intr.width - 1) & (v >= 0) & (v <= intr.height - 1)
        ok[ok] &= owner[vi[ok], ui[ok]] == keypoint_indices[ok]
        vis = np.nonzero(ok)[0]
        obs = keypoint_descriptors[vis] + spec.descriptor_noise_sigma * desc_rng.normal(
            size=(len(vis), GEOMETRIC_DIM)
        )
        if len(vis):
            geoms.append(
                GeometricDescriptorSet(
                    view_id=view_id,
                    pixels=np.stack([u[vis], v[vis]], axis=1).astype(np.float32),
                    descriptors=_unit(obs).astype(np.float32),
                )
            )
            kp_seen.update(int(i) for i in vis)

    next_mask_id = len(object_labels)
    for _ in range(spec.outlier_mask_count):
        if not frames:
            break
        view_id = frames[int(outlier_rng.integers(0, len(frames)))].view_id
        w = int(outlier_rng.integers(8, 21))
        h = int(outlier_rng.integers(8, 21))
        u0 = int(outlier_rng.integers(0, intr.width - w))
        v0 = int(outlier_rng.integers(0, intr.height - h))
        mask = np.zeros((intr.height, intr.width), dtype=bool)
        mask[v0 : v0 + h, u0 : u0 + w] = True
        label = CATEGORY_VOCAB[int(outlier_rng.integers(0, len(CATEGORY_VOCAB)))]
        masks.append(
            ObjectMask(view_id=view_id, mask=mask, category_label=label, mask_id=next_mask_id)
        )
        vec = prototypes[label] + spec.semantic_noise_sigma * outlier_rng.normal(size=SEMANTIC_DIM)
        feats.append(SemanticFeature(vector=_unit(vec).astype(np.float32), mask_ref=(view_id, next_mask_id)))
        next_mask_id += 1

    bundle = SceneBundle(
        frames=frames, masks=masks, semantic_features=feats, geometric=geoms, bundle_id=bundle_id
    )
    return bundle, object_mask_count, kp_seen


def generate_pair(spec: SceneSpec) -> tuple[SceneBundle, SceneBundle, GroundTruth]:
    """Source/target bundles plus ground truth; fully deterministic per spec."""
    ss = np.random.SeedSequence(spec.seed)
    geom_rng, sem_rng, desc_rng, view_rng, sensor_rng, outlier_rng = (
        np.random.default_rng(child) for child in ss.spawn(6)
    )

    n_objects = spec.object_count
    n_shared = max(1, int(round(spec.overlap_ratio * n_objects)))
    n_distract = n_objects - n_shared

    dup = max(1, spec.duplicates_per_category)
    total_objects = n_objects + n_distract
    labels_all = [CATEGORY_VOCAB[(i // dup) % len(CATEGORY_VOCAB)] for i in range(total_objects)]
    prototypes = {label: _unit(sem_rng.normal(size=SEMANTIC_DIM)) for label in CATEGORY_VOCAB}

    centers = _place_centers(geom_rng, total_objects)
    clusters = [
        _sample_object(geom_rng, spec.points_per_object) + centers[i] for i in range(total_objects)
    ]
    transform = _random_transform(geom_rng)

    src_objects = list(range(n_objects))
    tgt_objects = list(range(n_shared)) + list(range(n_objects, total_objects))
    tgt_order = geom_rng.permutation(len(tgt_objects))
    tgt_objects = [tgt_objects[i] for i in tgt_order]

    src_points = np.vstack([clusters[i] for i in src_objects])
    src_point_obj = np.repeat(np.arange(n_objects), spec.points_per_object)
    tgt_points_src_frame = np.vstack([clusters[i] for i in tgt_objects])
    tgt_points = transform.apply(tgt_points_src_frame)
    tgt_point_obj = np.repeat(np.arange(len(tgt_objects)), spec.points_per_object)

    n_kp = min(KEYPOINTS_PER_OBJECT, spec.points_per_object)
    kp_local = np.stack(
        [desc_rng.choice(spec.points_per_object, size=n_kp, replace=False) for _ in range(total_objects)]
    )
    kp_desc_all = _unit(desc_rng.normal(size=(total_objects, n_kp, GEOMETRIC_DIM)))

    src_kp_idx = np.concatenate(
        [kp_local[obj] + pos * spec.points_per_object for pos, obj in enumerate(src_objects)]
    )
    src_kp_desc = np.vstack([kp_desc_all[obj] for obj in src_objects])
    tgt_kp_idx = np.concatenate(
        [kp_local[obj] + pos * spec.points_per_object for pos, obj in enumerate(tgt_objects)]
    )
    tgt_kp_desc = np.vstack([kp_desc_all[obj] for obj in tgt_objects])

    src_center = src_points.mean(axis=0)
    tgt_center = tgt_points.mean(axis=0)
    src_poses = _camera_ring(view_rng, src_center, spec.view_count)
    tgt_poses = _camera_ring(view_rng, tgt_center, spec.view_count)

    src_bundle, src_mask_count, src_seen = _build_side(
        side="source",
        points=src_points,
        point_object=src_point_obj,
        object_labels=[labels_all[i] for i in src_objects],
        prototypes=prototypes,
        keypoint_indices=src_kp_idx,
        keypoint_descriptors=src_kp_desc,
        poses=src_poses,
        spec=spec,
        sem_rng=sem_rng,
        desc_rng=desc_rng,
        sensor_rng=sensor_rng,
        outlier_rng=outlier_rng,
        bundle_id=f"synth-{spec.seed}-source",
    )
    tgt_bundle, tgt_mask_count, tgt_seen = _build_side(
        side="target",
        points=tgt_points,
        point_object=tgt_point_obj,
        object_labels=[labels_all[i] for i in tgt_objects],
        prototypes=prototypes,
        keypoint_indices=tgt_kp_idx,
        keypoint_descriptors=tgt_kp_desc,
        poses=tgt_poses,
        spec=spec,
        sem_rng=sem_rng,
        desc_rng=desc_rng,
        sensor_rng=sensor_rng,
        outlier_rng=outlier_rng,
        bundle_id=f"synth-{spec.seed}-target",
    )

    if not src_bundle.frames or not tgt_bundle.frames:
        raise GenerationError("a side rendered no view with visible points")

    tgt_pos_of_obj = {obj: pos for pos, obj in enumerate(tgt_objects)}
    min_views = 2 if spec.view_count >= 2 else 1
    object_pairs = [
        (i, tgt_pos_of_obj[i])
        for i in range(n_shared)
        if src_mask_count[i] >= min_views and tgt_mask_count[tgt_pos_of_obj[i]] >= min_views
    ]
    if not object_pairs:
        raise GenerationError("no shared object is visible in enough views on both sides")

    # keypoint pairs over shared objects, indexed into the per-side keypoint arrays
    point_pairs = []
    for i in range(n_shared):
        tgt_pos = tgt_pos_of_obj[i]
        for kp in range(n_kp):
            si = i * n_kp + kp
            ti = tgt_pos * n_kp + kp
            if si in src_seen and ti in tgt_seen:
                point_pairs.append((si, ti))
    if len(point_pairs) < 3:
        raise GenerationError("fewer than 3 shared keypoints visible on both sides")

    gt = GroundTruth(
        transform=transform,
        object_pairs=object_pairs,
        point_pairs=point_pairs,
        overlap_points=np.vstack([clusters[i] for i in range(n_shared)]),
        source_keypoints=src_points[src_kp_idx],
        target_keypoints=tgt_points[tgt_kp_idx],
    )
    return src_bundle, tgt_bundle, gt


def _range_value(rng: np.random.Generator, value, integer: bool):
    if isinstance(value, (list, tuple)):
        lo, hi = value
        if integer:
            return int(rng.integers(int(lo), int(hi) + 1))
        return float(rng.uniform(float(lo), float(hi)))
    return int(value) if integer else float(value)


# fixed draw order keeps suite sampling deterministic across processes
_SUITE_INT_FIELDS = (
    "object_count", "duplicates_per_category", "points_per_object", "view_count", "outlier_mask_count",
)
_SUITE_FLOAT_FIELDS = (
    "overlap_ratio", "semantic_noise_sigma", "descriptor_noise_sigma", "depth_noise_sigma",
)


def default_suite_spec() -> dict:
    """Per-pair parameter ranges for the default synthetic benchmark."""
    return {
        "seed": 0,
        "object_count": [3, 8],
        "duplicates_per_category": [1, 3],
        "points_per_object": 400,
        "view_count": 3,
        "overlap_ratio": [0.4, 1.0],
        "semantic_noise_sigma": 0.05,
        "descriptor_noise_sigma": 0.02,
        "depth_noise_sigma": 0.005,
        "outlier_mask_count": [0, 2],
    }


def duplicate_heavy_suite_spec() -> dict:
    """Variant stressing same-category object instances."""
    spec = default_suite_spec()
    spec["object_count"] = [4, 8]
    spec["duplicates_per_category"] = [2, 3]
    return spec


def sample_scene_spec(suite: dict, pair_index: int) -> SceneSpec:
    base_seed = int(suite.get("seed", 0))
    rng = np.random.default_rng(np.random.SeedSequence([base_seed, pair_index]))
    kwargs = {}
    for name in _SUITE_INT_FIELDS:
        if name in suite:
            kwargs[name] = _range_value(rng, suite[name], integer=True)
    for name in _SUITE_FLOAT_FIELDS:
        if name in suite:
            kwargs[name] = _range_value(rng, suite[name], integer=False)
    kwargs["seed"] = int(rng.integers(0, 2**62))
    return SceneSpec(**kwargs)


def generate_pair_for_suite(suite: dict, pair_index: int, max_attempts: int = 5):
    """Samples a spec for the pair; retries with derived seeds on infeasibility."""
    spec = sample_scene_spec(suite, pair_index)
    base_seed = int(suite.get("seed", 0))
    for attempt in range(max_attempts):
        try:
            return generate_pair(spec), spec
        except GenerationError:
            retry = np.random.default_rng(
                np.random.SeedSequence([base_seed, pair_index, attempt + 1])
            )
            spec = SceneSpec(**{**spec.__dict__, "seed": int(retry.integers(0, 2**62))})
    raise GenerationError(f"pair {pair_index}: no feasible scene in {max_attempts} attempts")


def _write_f32(path: Path, arr: np.ndarray) -> dict:
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    path.write_bytes(payload)
    return {"file": path.name, "dtype": "f32", "shape": list(arr.shape)}


def write_ground_truth(gt: GroundTruth, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {
        "transform": gt.transform.to_row12(),
        "object_pairs": [[int(a), int(b)] for a, b in gt.object_pairs],
        "point_pairs": [[int(a), int(b)] for a, b in gt.point_pairs],
        "overlap_points": _write_f32(directory / "overlap_points.f32", gt.overlap_points),
        "source_keypoints": _write_f32(directory / "source_keypoints.f32", gt.source_keypoints),
        "target_keypoints": _write_f32(directory / "target_keypoints.f32", gt.target_keypoints),
    }
    (directory / "gt.json").write_text(json.dumps(doc, indent=2), encoding="utf-8")


def _read_f32(directory: Path, entry: dict) -> np.ndarray:
    path = directory / entry["file"]
    if not path.is_file():
        raise FormatError(f"ground-truth tensor missing: {path}")
    arr = np.frombuffer(path.read_bytes(), dtype="<f4")
    return arr.reshape([int(s) for s in entry["shape"]]).astype(np.float64)


def read_ground_truth(directory) -> GroundTruth:
    directory = Path(directory)
    path = directory / "gt.json"
    if not path.is_file():
        raise FormatError(f"ground truth missing: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    return GroundTruth(
        transform=RigidTransform.from_row12(doc["transform"]),
        object_pairs=[(int(a), int(b)) for a, b in doc["object_pairs"]],
        point_pairs=[(int(a), int(b)) for a, b in doc["point_pairs"]],
        overlap_points=_read_f32(directory, doc["overlap_points"]),
        source_keypoints=_read_f32(directory, doc["source_keypoints"]),
        target_keypoints=_read_f32(directory, doc["target_keypoints"]),
    )


def transform_bundle(bundle: SceneBundle, world: RigidTransform) -> SceneBundle:
    """Re-expresses a bundle in a rigidly transformed world frame.

    Depth images, masks, and features are untouched; only the camera poses
    move (pose' = world ∘ pose), so back-projected geometry lands at
    world(T(p)) for every point p.
    """
    frames = [
        DepthFrame(
            depth=f.depth,
            intrinsics=f.intrinsics,
            pose=CameraPose(
                rotation=world.rotation @ np.asarray(f.pose.rotation, dtype=np.float64),
                translation=world.apply(np.asarray(f.pose.translation, dtype=np.float64)),
            ),
            view_id=f.view_id,
        )
        for f in bundle.frames
    ]
    return SceneBundle(
        frames=frames,
        masks=bundle.masks,
        semantic_features=bundle.semantic_features,
        geometric=bundle.geometric,
        bundle_id=bundle.bundle_id,
    )


def generate_suite(out_dir, suite: dict, pairs: int) -> list[Path]:
    """Writes pair_XXXXX/{source,target,gt.json} directories; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(pairs):
        (src, tgt, gt), _spec = generate_pair_for_suite(suite, i)
        pair_dir = out / f"pair_{i:05d}"
        write_bundle(src, pair_dir / "source")
        write_bundle(tgt, pair_dir / "target")
        write_ground_truth(gt, pair_dir)
        written.append(pair_dir)
    return written

import numpy as np
import pytest

from zeroreg.bundle import (
    CameraIntrinsics,
    CameraPose,
    DepthFrame,
    GeometricDescriptorSet,
    ObjectMask,
    SceneBundle,
    SemanticFeature,
)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_rotation(rng):
    """Uniform random rotation via quaternion normalization."""
    q = unit(rng.normal(size=4))
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rot_z(degrees):
    a = np.radians(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def identity_frame(width=64, height=48, fx=100.0, fy=100.0, depth_value=0.0):
    intr = CameraIntrinsics(fx=fx, fy=fy, cx=width / 2, cy=height / 2, width=width, height=height)
    pose = CameraPose(rotation=np.eye(3), translation=np.zeros(3))
    depth = np.full((height, width), depth_value, dtype=np.float32)
    return DepthFrame(depth=depth, intrinsics=intr, pose=pose, view_id=0)


@pytest.fixture
def small_bundle():
    """Two-view bundle with one mask per view and a tiny descriptor set."""
    rng = np.random.default_rng(7)
    frames = []
    masks = []
    feats = []
    geoms = []
    for view in range(2):
        fr = identity_frame(depth_value=2.0)
        fr = DepthFrame(depth=fr.depth, intrinsics=fr.intrinsics, pose=fr.pose, view_id=view)
        frames.append(fr)
        mask = np.zeros((48, 64), dtype=bool)
        mask[10:20, 10:25] = True
        masks.append(ObjectMask(view_id=view, mask=mask, category_label="chair", mask_id=0))
        feats.append(
            SemanticFeature(
                vector=unit(rng.normal(size=8)).astype(np.float32), mask_ref=(view, 0)
            )
        )
        geoms.append(
            GeometricDescriptorSet(
                view_id=view,
                pixels=np.array([[12.0, 12.0], [20.0, 15.0]], dtype=np.float32),
                descriptors=unit(rng.normal(size=(2, 4))).astype(np.float32),
            )
        )
    return SceneBundle(
        frames=frames, masks=masks, semantic_features=feats, geometric=geoms, bundle_id="test-bundle"
    )

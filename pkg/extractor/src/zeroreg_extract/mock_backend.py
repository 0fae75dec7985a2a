"""Deterministic offline backend: objects, labels, and features from depth.

Detection is voxel-grid clustering of back-projected depth; labels come from
view-invariant geometry bands (bounding-box diagonal and centroid height) so
the same physical object receives the same label in every frame and in every
bundle cut from the same sequence. Semantic vectors are hashed from labels,
descriptors from quantized world position, which makes separately extracted
bundles of one sequence registrable against each other.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy import ndimage

from .config import ExtractorConfig
from .errors import EmptySceneError
from .sequence import Frame, back_project_frame

SEMANTIC_DIM = 32
GEOMETRIC_DIM = 16
VOXEL = 0.06  # clustering cell, meters
DESCRIPTOR_CELL = 0.04  # descriptor position hash cell, meters
MIN_CLUSTER_PIXELS = 40
MAX_KEYPOINTS_PER_FRAME = 600

_SIZE_THRESHOLD = 0.55  # visible bbox diagonal split, meters
_HEIGHT_WORDS = ("floor", "low", "mid", "high", "top", "ceiling")


def _rng_from(*parts) -> np.random.Generator:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(np.random.SeedSequence(int.from_bytes(digest[:16], "little")))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def label_vector(label: str, jitter_rng: np.random.Generator | None = None) -> np.ndarray:
    """Unit semantic vector derived from the label text alone."""
    vec = _rng_from("semantic", label).normal(size=SEMANTIC_DIM)
    if jitter_rng is not None:
        vec = vec + 0.01 * jitter_rng.normal(size=SEMANTIC_DIM)
    return _unit(vec)


def position_descriptor(cells: np.ndarray) -> np.ndarray:
    """Unit descriptors hashed from quantized world cells (one row per cell)."""
    out = np.empty((len(cells), GEOMETRIC_DIM))
    for i, cell in enumerate(cells):
        out[i] = _rng_from("descriptor", *cell.tolist()).normal(size=GEOMETRIC_DIM)
    return _unit(out)


def _cluster_frame(frame: Frame):
    """Voxel connected components; returns per-pixel cluster id image (-1 none)."""
    h, w = frame.depth.shape
    points, flat = back_project_frame(frame)
    label_img = np.full(h * w, -1, dtype=np.int64)
    if len(points) == 0:
        return label_img.reshape(h, w), {}
    cells = np.floor(points / VOXEL).astype(np.int64)
    lo = cells.min(axis=0)
    cells -= lo
    grid = np.zeros(cells.max(axis=0) + 1, dtype=bool)
    grid[tuple(cells.T)] = True
    labeled, count = ndimage.label(grid, structure=np.ones((3, 3, 3), dtype=bool))
    pix_label = labeled[tuple(cells.T)]
    label_img[flat] = pix_label
    clusters = {}
    for cid in range(1, count + 1):
        member = pix_label == cid
        if member.sum() < MIN_CLUSTER_PIXELS:
            label_img[flat[member]] = -1
            continue
        clusters[cid] = points[member]
    return label_img.reshape(h, w), clusters


def _geometry_label(points: np.ndarray) -> str:
    """View-stable label from coarse geometry bands.

    Bands are deliberately wide so partial visibility rarely flips them; an
    occasional flip only drops that view's mask from the object's track.
    """
    diag = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    height = float(points.mean(axis=0)[2])
    size_word = "large" if diag >= _SIZE_THRESHOLD else "small"
    height_band = min(max(int(height / 0.45), 0), len(_HEIGHT_WORDS) - 1)
    return f"{size_word}-{_HEIGHT_WORDS[height_band]}-object"


def run_mock(frames: list[Frame], config: ExtractorConfig):
    """Per-frame masks, labels, semantic features, and descriptor sets."""
    masks, feats, geoms = [], [], []
    detected_any = False
    for view_id, frame in enumerate(frames):
        label_img, clusters = _cluster_frame(frame)
        h, w = frame.depth.shape
        mask_id = 0
        for cid in sorted(clusters):
            mask = label_img == cid
            label = _geometry_label(clusters[cid])
            jitter = _rng_from("jitter", config.seed, view_id, mask_id)
            masks.append(
                {"view_id": view_id, "mask_id": mask_id, "category_label": label, "mask": mask}
            )
            feats.append(
                {
                    "mask_ref": (view_id, mask_id),
                    "vector": label_vector(label, jitter).astype(np.float32),
                }
            )
            mask_id += 1
            detected_any = True

        # keypoints: one per occupied descriptor cell (the pixel nearest the
        # cell center), so bundles cut from the same sequence sample the same
        # cells on commonly visible surface and their descriptors agree
        vs, us = np.nonzero(label_img >= 0)
        if len(vs) == 0:
            continue
        z = frame.depth[vs, us]
        cam = np.stack(
            [(us - frame.cx) * z / frame.fx, (vs - frame.cy) * z / frame.fy, z], axis=1
        )
        world = cam @ frame.rotation.T + frame.translation
        cells = np.floor(world / DESCRIPTOR_CELL).astype(np.int64)
        uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        centers = (uniq + 0.5) * DESCRIPTOR_CELL
        dist = np.linalg.norm(world - centers[inverse], axis=1)
        order = np.lexsort((dist, inverse))
        first = np.ones(len(order), dtype=bool)
        first[1:] = inverse[order][1:] != inverse[order][:-1]
        pick = order[first][:MAX_KEYPOINTS_PER_FRAME]
        geoms.append(
            {
                "view_id": view_id,
                "pixels": np.stack([us[pick], vs[pick]], axis=1).astype(np.float32),
                "descriptors": position_descriptor(cells[pick]).astype(np.float32),
            }
        )
    if not detected_any:
        raise EmptySceneError("mock backend detected no object in any frame")
    return masks, feats, geoms

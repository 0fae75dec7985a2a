"""Lifting 2D masks and features into 3D.

Back-projects depth pixels through the pinhole model, groups masks across
views into physical-object tracks, averages per-view semantic features into
one unified vector per object, and assembles the masked point cloud plus the
descriptor cloud consumed by point-level matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .bundle import DepthFrame, SceneBundle, normalize_label
from .errors import EmptyInputError, EmptySceneError, ZeroVectorError

MaskGroup = list[tuple[int, int]]


@dataclass
class ObjectRegion:
    point_indices: np.ndarray  # int64 indices into MaskedPointCloud.all_points
    category_label: str
    semantic: np.ndarray  # unified unit vector
    source_masks: list[tuple[int, int]]


@dataclass
class MaskedPointCloud:
    objects: list[ObjectRegion]
    all_points: np.ndarray  # (N, 3) float64 world coordinates


@dataclass
class PointDescriptorCloud:
    points: np.ndarray  # (L, 3) float64
    descriptors: np.ndarray  # (L, g) float64 unit rows
    object_index: np.ndarray  # (L,) int64, -1 = not inside any surviving mask


@dataclass
class ProjectionConfig:
    overlap_threshold: float = 0.3
    voxel_size: float = 0.05
    merge_radius: float = 0.02
    single_view_mode: bool = False
    max_track_points: int = 2000  # subsample cap for overlap tests only


@dataclass
class ProjectionDiagnostics:
    dropped_pixels: int = 0
    mask_groups: list[dict] = field(default_factory=list)
    descriptor_points: int = 0
    merged_descriptor_points: int = 0

    def report(self) -> str:
        lines = [
            f"dropped zero-depth pixels: {self.dropped_pixels}",
            f"descriptor points: {self.descriptor_points} "
            f"(after merge: {self.merged_descriptor_points})",
            "mask groups:",
        ]
        for g in self.mask_groups:
            members = " ".join(f"{v}:{m}" for v, m in g["members"])
            lines.append(f"  [{g['region']}] {g['label']} points={g['points']} masks={members}")
        return "\n".join(lines)


def back_project(frame: DepthFrame, pixels) -> tuple[np.ndarray, list[int]]:
    """Pixels (u, v) to world-frame points via the frame's depth and pose.

    Depth is sampled at the nearest integer pixel; the ray uses the given
    (possibly sub-pixel) coordinates. Pixels with zero depth are skipped and
    returned in the dropped list (positions into the input sequence).
    """
    px = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    if px.shape[0] == 0:
        return np.zeros((0, 3)), []
    intr = frame.intrinsics
    ui = np.clip(np.rint(px[:, 0]).astype(np.int64), 0, intr.width - 1)
    vi = np.clip(np.rint(px[:, 1]).astype(np.int64), 0, intr.height - 1)
    z = np.asarray(frame.depth, dtype=np.float64)[vi, ui]
    keep = z > 0
    dropped = np.nonzero(~keep)[0].tolist()
    u, v, z = px[keep, 0], px[keep, 1], z[keep]
    cam = np.stack(
        [(u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z], axis=1
    )
    rot = np.asarray(frame.pose.rotation, dtype=np.float64)
    t = np.asarray(frame.pose.translation, dtype=np.float64)
    return cam @ rot.T + t, dropped


def project_points(frame: DepthFrame, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World points to (u, v, z) in the frame's camera; inverse of back_project.

    Returns (pixels (N, 2), depths (N,)); callers filter on z > 0 and bounds.
    """
    rot = np.asarray(frame.pose.rotation, dtype=np.float64)
    t = np.asarray(frame.pose.translation, dtype=np.float64)
    cam = (np.asarray(points, dtype=np.float64) - t) @ rot
    z = cam[:, 2]
    intr = frame.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * cam[:, 0] / z + intr.cx
        v = intr.fy * cam[:, 1] / z + intr.cy
    return np.stack([u, v], axis=1), z


def average_features(vectors) -> np.ndarray:
    """Arithmetic mean of equal-dimension vectors, renormalized to unit length."""
    vecs = [np.asarray(v, dtype=np.float64) for v in vectors]
    if not vecs:
        raise EmptyInputError("average_features: empty input")
    dims = {v.shape for v in vecs}
    if len(dims) != 1:
        raise ZeroVectorError(f"average_features: mixed dimensions {sorted(dims)}")
    stacked = np.stack(vecs)
    norms = np.linalg.norm(stacked, axis=1)
    if (norms == 0).any():
        raise ZeroVectorError("average_features: zero-norm member vector")
    mean = stacked.mean(axis=0)
    n = float(np.linalg.norm(mean))
    if n == 0:
        raise ZeroVectorError("average_features: mean vector has zero norm")
    return mean / n


def _mask_points(bundle: SceneBundle, cap: int | None = None):
    """Back-projects every mask's pixels; returns points and dropped-pixel count."""
    frames = {f.view_id: f for f in bundle.frames}
    out = []
    dropped = 0
    for mk in bundle.masks:
        vs, us = np.nonzero(mk.mask)
        pix = np.stack([us, vs], axis=1).astype(np.float64)
        if cap is not None and len(pix) > cap:
            sel = np.linspace(0, len(pix) - 1, cap).astype(np.int64)
            pix = pix[sel]
        pts, drop = back_project(frames[mk.view_id], pix)
        dropped += len(drop)
        out.append(pts)
    return out, dropped


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def consistent_object_tracks(
    bundle: SceneBundle,
    overlap_threshold: float = 0.3,
    voxel_size: float = 0.05,
    single_view_mode: bool = False,
    max_track_points: int = 2000,
) -> list[MaskGroup]:
    """Groups masks across views that cover the same physical object.

    Two masks from different views connect when their category labels match
    and the back-projected points of the smaller mask have at least
    `overlap_threshold` fraction within `voxel_size` of the other's points.
    Single-view groups are dropped unless single_view_mode is on.
    """
    masks = sorted(bundle.masks, key=lambda m: (m.view_id, m.mask_id))
    order = sorted(range(len(bundle.masks)), key=lambda i: (bundle.masks[i].view_id, bundle.masks[i].mask_id))
    pts_all, _ = _mask_points(bundle, cap=max_track_points)
    pts = [pts_all[i] for i in order]
    labels = [normalize_label(m.category_label) for m in masks]
    trees = [cKDTree(p) if len(p) else None for p in pts]

    uf = _UnionFind(len(masks))
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            if masks[i].view_id == masks[j].view_id or labels[i] != labels[j]:
                continue
            if trees[i] is None or trees[j] is None:
                continue
            small, big = (i, j) if len(pts[i]) <= len(pts[j]) else (j, i)
            d, _ = trees[big].query(pts[small], k=1, distance_upper_bound=voxel_size)
            ratio = float(np.isfinite(d).mean())
            if ratio >= overlap_threshold:
                uf.union(i, j)

    groups: dict[int, MaskGroup] = {}
    for i, mk in enumerate(masks):
        groups.setdefault(uf.find(i), []).append((mk.view_id, mk.mask_id))
    result = [sorted(g) for g in groups.values()]
    result.sort()
    if not single_view_mode:
        result = [g for g in result if len(g) >= 2]
    return result


def _dedup_points(points: np.ndarray, quantum: float = 1e-4) -> np.ndarray:
    """Removes duplicate points (bitwise duplicates collapse exactly)."""
    if len(points) == 0:
        return points
    keys = np.round(points / quantum).astype(np.int64)
    _, keep = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(keep)]


def _merge_descriptors(points, descriptors, owners, merge_radius):
    """Voxel-cell merge of multi-view descriptor observations.

    Points falling in the same merge_radius cell collapse to their mean
    position and renormalized mean descriptor; ownership follows the first
    member in input order.
    """
    if len(points) == 0:
        return points, descriptors, owners
    keys = np.floor(points / merge_radius).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    n_cells = len(counts)
    pos = np.zeros((n_cells, 3))
    desc = np.zeros((n_cells, descriptors.shape[1]))
    np.add.at(pos, inverse, points)
    np.add.at(desc, inverse, descriptors)
    pos /= counts[:, None]
    norms = np.linalg.norm(desc, axis=1)
    first = np.full(n_cells, len(points), dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(len(points), dtype=np.int64))
    degenerate = norms < 1e-12
    desc[degenerate] = descriptors[first[degenerate]]
    norms[degenerate] = np.linalg.norm(desc[degenerate], axis=1)
    desc /= norms[:, None]
    own = owners[first]
    # present cells in first-appearance order so output is stable
    order = np.argsort(first, kind="stable")
    return pos[order], desc[order], own[order]


def build_masked_cloud(
    bundle: SceneBundle, config: ProjectionConfig | None = None
) -> tuple[MaskedPointCloud, PointDescriptorCloud, ProjectionDiagnostics]:
    """Full projection stage: tracks -> regions -> descriptor cloud."""
    cfg = config or ProjectionConfig()
    diag = ProjectionDiagnostics()
    frames = {f.view_id: f for f in bundle.frames}
    feats = {tuple(sf.mask_ref): sf.vector for sf in bundle.semantic_features}
    masks = {(m.view_id, m.mask_id): m for m in bundle.masks}

    groups = consistent_object_tracks(
        bundle,
        overlap_threshold=cfg.overlap_threshold,
        voxel_size=cfg.voxel_size,
        single_view_mode=cfg.single_view_mode,
        max_track_points=cfg.max_track_points,
    )
    if not groups:
        raise EmptySceneError("no mask group survived multi-view consistency filtering")

    regions: list[ObjectRegion] = []
    chunks: list[np.ndarray] = []
    offset = 0
    kept_groups: list[MaskGroup] = []
    for group in groups:
        pts_parts = []
        for view_id, mask_id in group:
            mk = masks[(view_id, mask_id)]
            vs, us = np.nonzero(mk.mask)
            pts, drop = back_project(frames[view_id], np.stack([us, vs], axis=1))
            diag.dropped_pixels += len(drop)
            if len(pts):
                pts_parts.append(pts)
        if not pts_parts:
            continue
        pts = _dedup_points(np.vstack(pts_parts))
        member_feats = [feats[ref] for ref in group if ref in feats]
        if not member_feats:
            continue
        semantic = average_features(member_feats)
        label = normalize_label(masks[group[0]].category_label)
        idx = np.arange(offset, offset + len(pts), dtype=np.int64)
        regions.append(
            ObjectRegion(point_indices=idx, category_label=label, semantic=semantic, source_masks=list(group))
        )
        chunks.append(pts)
        kept_groups.append(group)
        offset += len(pts)
    if not regions:
        raise EmptySceneError("all surviving mask groups project to empty point sets")
    cloud = MaskedPointCloud(objects=regions, all_points=np.vstack(chunks))
    for r, g in zip(regions, kept_groups):
        diag.mask_groups.append(
            {
                "region": len(diag.mask_groups),
                "label": r.category_label,
                "members": g,
                "points": int(len(r.point_indices)),
            }
        )

    # region ownership lookup per view: mask containment at projection time
    group_of_mask = {}
    for ridx, g in enumerate(kept_groups):
        for ref in g:
            group_of_mask[ref] = ridx

    pts_parts, desc_parts, own_parts = [], [], []
    for gs in sorted(bundle.geometric, key=lambda g: g.view_id):
        fr = frames[gs.view_id]
        pts, dropped = back_project(fr, gs.pixels)
        diag.dropped_pixels += len(dropped)
        keep = np.setdiff1d(np.arange(len(gs.pixels)), np.asarray(dropped, dtype=np.int64))
        if len(keep) == 0:
            continue
        px = np.asarray(gs.pixels, dtype=np.float64)[keep]
        ui = np.clip(np.rint(px[:, 0]).astype(np.int64), 0, fr.intrinsics.width - 1)
        vi = np.clip(np.rint(px[:, 1]).astype(np.int64), 0, fr.intrinsics.height - 1)
        owners = np.full(len(keep), -1, dtype=np.int64)
        for (view_id, mask_id), ridx in group_of_mask.items():
            if view_id != gs.view_id:
                continue
            inside = masks[(view_id, mask_id)].mask[vi, ui] & (owners < 0)
            owners[inside] = ridx
        pts_parts.append(pts)
        desc_parts.append(np.asarray(gs.descriptors, dtype=np.float64)[keep])
        own_parts.append(owners)

    if pts_parts:
        points = np.vstack(pts_parts)
        descs = np.vstack(desc_parts)
        owners = np.concatenate(own_parts)
    else:
        points = np.zeros((0, 3))
        descs = np.zeros((0, geometric_dim_or(bundle, 0)))
        owners = np.zeros(0, dtype=np.int64)
    diag.descriptor_points = len(points)
    points, descs, owners = _merge_descriptors(points, descs, owners, cfg.merge_radius)
    diag.merged_descriptor_points = len(points)
    desc_cloud = PointDescriptorCloud(points=points, descriptors=descs, object_index=owners)
    return cloud, desc_cloud, diag


def geometric_dim_or(bundle: SceneBundle, default: int) -> int:
    return int(bundle.geometric[0].descriptors.shape[1]) if bundle.geometric else default


def build_descriptor_cloud(bundle: SceneBundle, merge_radius: float = 0.02) -> PointDescriptorCloud:
    """Descriptor cloud without object ownership (object-level stage disabled)."""
    frames = {f.view_id: f for f in bundle.frames}
    pts_parts, desc_parts = [], []
    for gs in sorted(bundle.geometric, key=lambda g: g.view_id):
        pts, dropped = back_project(frames[gs.view_id], gs.pixels)
        keep = np.setdiff1d(np.arange(len(gs.pixels)), np.asarray(dropped, dtype=np.int64))
        if len(keep) == 0:
            continue
        pts_parts.append(pts)
        desc_parts.append(np.asarray(gs.descriptors, dtype=np.float64)[keep])
    if not pts_parts:
        return PointDescriptorCloud(
            points=np.zeros((0, 3)),
            descriptors=np.zeros((0, geometric_dim_or(bundle, 0))),
            object_index=np.zeros(0, dtype=np.int64),
        )
    points = np.vstack(pts_parts)
    descs = np.vstack(desc_parts)
    owners = np.full(len(points), -1, dtype=np.int64)
    points, descs, owners = _merge_descriptors(points, descs, owners, merge_radius)
    return PointDescriptorCloud(points=points, descriptors=descs, object_index=owners)

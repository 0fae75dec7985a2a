"""Scene bundle data model and on-disk interchange format.

A bundle directory holds `manifest.json` plus raw tensor files. Tensors are
row-major little-endian float32 (`f32`) or bytes 0/1 (`u8`); shapes live only
in the manifest. Depths are meters with 0.0 marking invalid pixels.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError, WriteError

_ORTHO_TOL = 1e-6
_UNIT_ROW_TOL = 1e-3

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world rotation and translation."""

    rotation: np.ndarray
    translation: np.ndarray


@dataclass
class DepthFrame:
    depth: np.ndarray  # (height, width) float32, meters, 0 = invalid
    intrinsics: CameraIntrinsics
    pose: CameraPose
    view_id: int


@dataclass
class ObjectMask:
    view_id: int
    mask: np.ndarray  # (height, width) bool
    category_label: str
    mask_id: int


@dataclass
class SemanticFeature:
    vector: np.ndarray  # (d,) float32
    mask_ref: tuple[int, int]  # (view_id, mask_id)


@dataclass
class GeometricDescriptorSet:
    view_id: int
    pixels: np.ndarray  # (L, 2) float32, (u, v)
    descriptors: np.ndarray  # (L, g) float32, unit rows


@dataclass
class SceneBundle:
    frames: list[DepthFrame]
    masks: list[ObjectMask]
    semantic_features: list[SemanticFeature]
    geometric: list[GeometricDescriptorSet]
    bundle_id: str
    extras: dict = field(default_factory=dict)


def normalize_label(label: str) -> str:
    """Category labels compare by exact string equality after trimming."""
    return label.strip()


def semantic_dim(bundle: SceneBundle) -> int:
    return int(bundle.semantic_features[0].vector.shape[0]) if bundle.semantic_features else 0


def geometric_dim(bundle: SceneBundle) -> int:
    return int(bundle.geometric[0].descriptors.shape[1]) if bundle.geometric else 0


def _check(cond: bool, field_name: str, detail: str) -> None:
    if not cond:
        raise ValidationError(f"{field_name}: {detail}")


def validate_intrinsics(intr: CameraIntrinsics, where: str) -> None:
    _check(intr.fx > 0, f"{where}.fx", "must be positive")
    _check(intr.fy > 0, f"{where}.fy", "must be positive")
    _check(0 <= intr.cx < intr.width, f"{where}.cx", "must lie within [0, width)")
    _check(0 <= intr.cy < intr.height, f"{where}.cy", "must lie within [0, height)")


def validate_rotation(rot: np.ndarray, where: str, tol: float = _ORTHO_TOL) -> None:
    _check(rot.shape == (3, 3), where, f"expected 3x3, got {rot.shape}")
    err = np.abs(rot.T @ rot - np.eye(3)).max()
    _check(err <= tol, where, f"not orthonormal (|R^T R - I| = {err:.2e})")
    det = float(np.linalg.det(rot))
    _check(abs(det - 1.0) <= tol, where, f"det(R) = {det:.8f}, expected +1")


def validate_bundle(bundle: SceneBundle) -> None:
    """Checks every documented invariant; raises ValidationError naming the field."""
    _check(len(bundle.frames) >= 1, "frames", "bundle must contain at least one frame")
    frame_by_view: dict[int, DepthFrame] = {}
    for i, fr in enumerate(bundle.frames):
        where = f"frames[{i}]"
        validate_intrinsics(fr.intrinsics, f"{where}.intrinsics")
        validate_rotation(np.asarray(fr.pose.rotation, dtype=np.float64), f"{where}.pose.rotation")
        _check(np.asarray(fr.pose.translation).shape == (3,), f"{where}.pose.translation", "expected 3-vector")
        d = np.asarray(fr.depth)
        _check(
            d.shape == (fr.intrinsics.height, fr.intrinsics.width),
            f"{where}.depth",
            f"shape {d.shape} does not match intrinsics {fr.intrinsics.height}x{fr.intrinsics.width}",
        )
        _check(bool(np.isfinite(d).all()), f"{where}.depth", "contains non-finite values")
        _check(bool((d >= 0).all()), f"{where}.depth", "contains negative depths")
        _check(fr.view_id not in frame_by_view, f"{where}.view_id", f"duplicate view_id {fr.view_id}")
        frame_by_view[fr.view_id] = fr

    mask_refs = set()
    for i, mk in enumerate(bundle.masks):
        where = f"masks[{i}]"
        _check(mk.view_id in frame_by_view, f"{where}.view_id", f"view {mk.view_id} has no frame")
        fr = frame_by_view[mk.view_id]
        m = np.asarray(mk.mask)
        _check(
            m.shape == (fr.intrinsics.height, fr.intrinsics.width),
            f"{where}.mask",
            f"shape {m.shape} does not match view {mk.view_id}",
        )
        _check(bool(m.any()), f"{where}.mask", "has zero true pixels")
        _check(len(normalize_label(mk.category_label)) > 0, f"{where}.category_label", "empty label")
        ref = (mk.view_id, mk.mask_id)
        _check(ref not in mask_refs, f"{where}.mask_id", f"duplicate mask ref {ref}")
        mask_refs.add(ref)

    dims = {f.vector.shape[0] for f in bundle.semantic_features}
    _check(len(dims) <= 1, "semantic_features", f"inconsistent feature dims {sorted(dims)}")
    for i, sf in enumerate(bundle.semantic_features):
        where = f"semantic_features[{i}]"
        _check(tuple(sf.mask_ref) in mask_refs, f"{where}.mask_ref", f"unresolved mask ref {tuple(sf.mask_ref)}")
        _check(float(np.linalg.norm(sf.vector)) > 0, f"{where}.vector", "zero norm")

    gdims = {g.descriptors.shape[1] for g in bundle.geometric}
    _check(len(gdims) <= 1, "geometric", f"inconsistent descriptor dims {sorted(gdims)}")
    for i, gs in enumerate(bundle.geometric):
        where = f"geometric[{i}]"
        _check(gs.view_id in frame_by_view, f"{where}.view_id", f"view {gs.view_id} has no frame")
        fr = frame_by_view[gs.view_id]
        px = np.asarray(gs.pixels)
        _check(px.ndim == 2 and px.shape[1] == 2, f"{where}.pixels", f"expected (L, 2), got {px.shape}")
        _check(px.shape[0] == gs.descriptors.shape[0], f"{where}.descriptors", "row count differs from pixels")
        if px.shape[0]:
            in_u = (px[:, 0] >= 0) & (px[:, 0] < fr.intrinsics.width)
            in_v = (px[:, 1] >= 0) & (px[:, 1] < fr.intrinsics.height)
            _check(bool((in_u & in_v).all()), f"{where}.pixels", "coordinates outside image bounds")
            norms = np.linalg.norm(np.asarray(gs.descriptors, dtype=np.float64), axis=1)
            _check(
                bool(np.abs(norms - 1.0).max() <= _UNIT_ROW_TOL),
                f"{where}.descriptors",
                "rows are not unit-norm",
            )


def bundles_equal(a: SceneBundle, b: SceneBundle) -> bool:
    """Field-for-field equality; tensor payloads compared bitwise."""
    if a.bundle_id != b.bundle_id:
        return False
    if len(a.frames) != len(b.frames) or len(a.masks) != len(b.masks):
        return False
    if len(a.semantic_features) != len(b.semantic_features) or len(a.geometric) != len(b.geometric):
        return False
    for fa, fb in zip(a.frames, b.frames):
        if fa.view_id != fb.view_id or fa.intrinsics != fb.intrinsics:
            return False
        if not np.array_equal(fa.pose.rotation, fb.pose.rotation):
            return False
        if not np.array_equal(fa.pose.translation, fb.pose.translation):
            return False
        if fa.depth.tobytes() != fb.depth.tobytes():
            return False
    for ma, mb in zip(a.masks, b.masks):
        if (ma.view_id, ma.mask_id, ma.category_label) != (mb.view_id, mb.mask_id, mb.category_label):
            return False
        if not np.array_equal(ma.mask, mb.mask):
            return False
    for sa, sb in zip(a.semantic_features, b.semantic_features):
        if tuple(sa.mask_ref) != tuple(sb.mask_ref) or sa.vector.tobytes() != sb.vector.tobytes():
            return False
    for ga, gb in zip(a.geometric, b.geometric):
        if ga.view_id != gb.view_id:
            return False
        if ga.pixels.tobytes() != gb.pixels.tobytes() or ga.descriptors.tobytes() != gb.descriptors.tobytes():
            return False
    return True


def _tensor_entry(name: str, arr: np.ndarray) -> tuple[dict, bytes]:
    if arr.dtype == np.bool_:
        payload = arr.astype(np.uint8).tobytes(order="C")
        dtype = "u8"
    else:
        payload = np.ascontiguousarray(arr, dtype="<f4").tobytes(order="C")
        dtype = "f32"
    entry = {"name": name, "file": f"{name}.{dtype}", "dtype": dtype, "shape": list(arr.shape)}
    return entry, payload


def write_bundle(bundle: SceneBundle, directory) -> None:
    """Writes the bundle directory; re-reading yields an identical bundle."""
    validate_bundle(bundle)
    directory = Path(directory)
    tensors: list[tuple[dict, bytes]] = []

    def add(name: str, arr: np.ndarray) -> dict:
        entry, payload = _tensor_entry(name, arr)
        tensors.append((entry, payload))
        return entry

    manifest = {
        "bundle_id": bundle.bundle_id,
        "semantic_dim": semantic_dim(bundle),
        "geometric_dim": geometric_dim(bundle),
        "frames": [],
        "masks": [],
        "semantic_features": [],
        "geometric_sets": [],
    }
    for fr in bundle.frames:
        manifest["frames"].append(
            {
                "view_id": fr.view_id,
                "intrinsics": {
                    "fx": fr.intrinsics.fx,
                    "fy": fr.intrinsics.fy,
                    "cx": fr.intrinsics.cx,
                    "cy": fr.intrinsics.cy,
                    "width": fr.intrinsics.width,
                    "height": fr.intrinsics.height,
                },
                "pose": {
                    "rotation": np.asarray(fr.pose.rotation, dtype=np.float64).tolist(),
                    "translation": np.asarray(fr.pose.translation, dtype=np.float64).tolist(),
                },
                "depth": add(f"frame_{fr.view_id}_depth", np.asarray(fr.depth, dtype=np.float32)),
            }
        )
    for mk in bundle.masks:
        manifest["masks"].append(
            {
                "view_id": mk.view_id,
                "mask_id": mk.mask_id,
                "category_label": mk.category_label,
                "mask": add(f"mask_{mk.view_id}_{mk.mask_id}", np.asarray(mk.mask, dtype=np.bool_)),
            }
        )
    for i, sf in enumerate(bundle.semantic_features):
        manifest["semantic_features"].append(
            {
                "mask_ref": [int(sf.mask_ref[0]), int(sf.mask_ref[1])],
                "vector": add(f"semantic_{i}", np.asarray(sf.vector, dtype=np.float32)),
            }
        )
    for i, gs in enumerate(bundle.geometric):
        manifest["geometric_sets"].append(
            {
                "view_id": gs.view_id,
                "pixels": add(f"geometric_{i}_pixels", np.asarray(gs.pixels, dtype=np.float32)),
                "descriptors": add(f"geometric_{i}_descriptors", np.asarray(gs.descriptors, dtype=np.float32)),
            }
        )

    try:
        directory.mkdir(parents=True, exist_ok=True)
        for entry, payload in tensors:
            with open(directory / entry["file"], "wb") as fh:
                fh.write(payload)
        text = json.dumps(manifest, indent=2, sort_keys=True)
        with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        path = getattr(exc, "filename", None) or str(directory)
        raise WriteError(f"failed writing bundle file {path}: {exc}") from exc


_DTYPES = {"f32": (np.dtype("<f4"), 4), "u8": (np.dtype(np.uint8), 1)}


def _read_tensor(directory: Path, entry: dict) -> np.ndarray:
    try:
        dtype_tag = entry["dtype"]
        shape = tuple(int(s) for s in entry["shape"])
        fname = entry["file"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed tensor entry {entry!r}") from exc
    if dtype_tag not in _DTYPES:
        raise FormatError(f"tensor {entry.get('name')}: unknown dtype {dtype_tag!r}")
    dtype, itemsize = _DTYPES[dtype_tag]
    path = directory / fname
    if not path.is_file():
        raise FormatError(f"tensor file missing: {path}")
    expected = int(np.prod(shape)) * itemsize if shape else itemsize
    raw = path.read_bytes()
    if len(raw) != expected:
        raise FormatError(
            f"tensor {entry.get('name')}: file {fname} holds {len(raw)} bytes, "
            f"manifest shape {list(shape)} requires {expected}"
        )
    arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
    if dtype_tag == "u8":
        return arr.astype(np.bool_)
    return arr


def read_bundle(directory) -> SceneBundle:
    """Loads and fully validates a bundle directory."""
    directory = Path(directory)
    mpath = directory / MANIFEST_NAME
    if not mpath.is_file():
        raise FormatError(f"manifest missing: {mpath}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"manifest unreadable: {exc}") from exc

    try:
        frames = []
        for f in manifest["frames"]:
            intr = CameraIntrinsics(
                fx=float(f["intrinsics"]["fx"]),
                fy=float(f["intrinsics"]["fy"]),
                cx=float(f["intrinsics"]["cx"]),
                cy=float(f["intrinsics"]["cy"]),
                width=int(f["intrinsics"]["width"]),
                height=int(f["intrinsics"]["height"]),
            )
            pose = CameraPose(
                rotation=np.asarray(f["pose"]["rotation"], dtype=np.float64),
                translation=np.asarray(f["pose"]["translation"], dtype=np.float64),
            )
            frames.append(
                DepthFrame(
                    depth=_read_tensor(directory, f["depth"]),
                    intrinsics=intr,
                    pose=pose,
                    view_id=int(f["view_id"]),
                )
            )
        masks = [
            ObjectMask(
                view_id=int(m["view_id"]),
                mask=_read_tensor(directory, m["mask"]),
                category_label=str(m["category_label"]),
                mask_id=int(m["mask_id"]),
            )
            for m in manifest["masks"]
        ]
        feats = [
            SemanticFeature(
                vector=_read_tensor(directory, s["vector"]),
                mask_ref=(int(s["mask_ref"][0]), int(s["mask_ref"][1])),
            )
            for s in manifest["semantic_features"]
        ]
        geoms = [
            GeometricDescriptorSet(
                view_id=int(g["view_id"]),
                pixels=_read_tensor(directory, g["pixels"]),
                descriptors=_read_tensor(directory, g["descriptors"]),
            )
            for g in manifest["geometric_sets"]
        ]
        bundle = SceneBundle(
            frames=frames,
            masks=masks,
            semantic_features=feats,
            geometric=geoms,
            bundle_id=str(manifest["bundle_id"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest structure invalid: {exc}") from exc

    declared_d = int(manifest.get("semantic_dim", 0))
    if bundle.semantic_features and declared_d != semantic_dim(bundle):
        raise FormatError(
            f"manifest semantic_dim {declared_d} disagrees with tensors ({semantic_dim(bundle)})"
        )
    declared_g = int(manifest.get("geometric_dim", 0))
    if bundle.geometric and declared_g != geometric_dim(bundle):
        raise FormatError(
            f"manifest geometric_dim {declared_g} disagrees with tensors ({geometric_dim(bundle)})"
        )
    validate_bundle(bundle)
    return bundle

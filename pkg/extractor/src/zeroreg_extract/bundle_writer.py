"""Writes the registration engine's bundle directory format.

The format is the wire contract between the two packages: `manifest.json`
plus raw row-major little-endian tensors (`f32` floats, `u8` booleans),
shapes recorded only in the manifest. Output is atomic: a temp directory is
renamed into place.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import WriteError


@dataclass
class BundleData:
    """In-memory bundle staged for writing."""

    bundle_id: str
    frames: list = field(default_factory=list)  # dicts: view_id, intrinsics, pose, depth array
    masks: list = field(default_factory=list)  # dicts: view_id, mask_id, category_label, mask array
    semantic_features: list = field(default_factory=list)  # dicts: mask_ref, vector array
    geometric_sets: list = field(default_factory=list)  # dicts: view_id, pixels, descriptors
    provenance: dict = field(default_factory=dict)


def _tensor(name: str, arr: np.ndarray, tensors: list) -> dict:
    if arr.dtype == np.bool_:
        dtype, payload = "u8", arr.astype(np.uint8).tobytes(order="C")
    else:
        dtype, payload = "f32", np.ascontiguousarray(arr, dtype="<f4").tobytes(order="C")
    entry = {"name": name, "file": f"{name}.{dtype}", "dtype": dtype, "shape": list(arr.shape)}
    tensors.append((entry["file"], payload))
    return entry


def write_bundle_dir(data: BundleData, out_dir) -> Path:
    out_dir = Path(out_dir)
    if out_dir.exists():
        raise WriteError(f"output already exists: {out_dir}")
    tensors: list[tuple[str, bytes]] = []
    manifest = {
        "bundle_id": data.bundle_id,
        "semantic_dim": int(data.semantic_features[0]["vector"].shape[0]) if data.semantic_features else 0,
        "geometric_dim": int(data.geometric_sets[0]["descriptors"].shape[1]) if data.geometric_sets else 0,
        "frames": [],
        "masks": [],
        "semantic_features": [],
        "geometric_sets": [],
    }
    if data.provenance:
        manifest["provenance"] = data.provenance
    for fr in data.frames:
        manifest["frames"].append(
            {
                "view_id": fr["view_id"],
                "intrinsics": fr["intrinsics"],
                "pose": fr["pose"],
                "depth": _tensor(f"frame_{fr['view_id']}_depth", fr["depth"], tensors),
            }
        )
    for mk in data.masks:
        manifest["masks"].append(
            {
                "view_id": mk["view_id"],
                "mask_id": mk["mask_id"],
                "category_label": mk["category_label"],
                "mask": _tensor(f"mask_{mk['view_id']}_{mk['mask_id']}", mk["mask"], tensors),
            }
        )
    for i, sf in enumerate(data.semantic_features):
        manifest["semantic_features"].append(
            {
                "mask_ref": list(sf["mask_ref"]),
                "vector": _tensor(f"semantic_{i}", sf["vector"], tensors),
            }
        )
    for i, gs in enumerate(data.geometric_sets):
        manifest["geometric_sets"].append(
            {
                "view_id": gs["view_id"],
                "pixels": _tensor(f"geometric_{i}_pixels", gs["pixels"], tensors),
                "descriptors": _tensor(f"geometric_{i}_descriptors", gs["descriptors"], tensors),
            }
        )

    tmp = out_dir.with_name(out_dir.name + f".tmp-{os.getpid()}")
    try:
        tmp.mkdir(parents=True)
        for fname, payload in tensors:
            (tmp / fname).write_bytes(payload)
        (tmp / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
        )
        os.rename(tmp, out_dir)
    except OSError as exc:
        raise WriteError(f"failed writing bundle to {out_dir}: {exc}") from exc
    return out_dir

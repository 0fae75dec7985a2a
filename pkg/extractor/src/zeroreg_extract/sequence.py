"""RGB-D sequence input: reading, plus a tiny synthetic demo generator.

A sequence directory holds `sequence.json` listing frames with intrinsics,
camera-to-world poses, and raw float32 depth files (meters, 0 = invalid).
RGB files are optional and only required by the real backend.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SequenceError

SEQUENCE_MANIFEST = "sequence.json"


@dataclass
class Frame:
    depth: np.ndarray  # (h, w) float64
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # (3, 3) camera-to-world
    translation: np.ndarray  # (3,)
    rgb_path: Path | None = None


def read_sequence(directory) -> list[Frame]:
    directory = Path(directory)
    manifest = directory / SEQUENCE_MANIFEST
    if not manifest.is_file():
        raise SequenceError(f"sequence manifest missing: {manifest}")
    try:
        doc = json.loads(manifest.read_text(encoding="utf-8"))
        frames = []
        for entry in doc["frames"]:
            w, h = int(entry["width"]), int(entry["height"])
            raw = (directory / entry["depth"]).read_bytes()
            if len(raw) != w * h * 4:
                raise SequenceError(
                    f"{entry['depth']}: {len(raw)} bytes, expected {w * h * 4} for {h}x{w}"
                )
            depth = np.frombuffer(raw, dtype="<f4").reshape(h, w).astype(np.float64)
            rgb = entry.get("rgb")
            frames.append(
                Frame(
                    depth=depth,
                    fx=float(entry["fx"]),
                    fy=float(entry["fy"]),
                    cx=float(entry["cx"]),
                    cy=float(entry["cy"]),
                    rotation=np.asarray(entry["rotation"], dtype=np.float64),
                    translation=np.asarray(entry["translation"], dtype=np.float64),
                    rgb_path=directory / rgb if rgb else None,
                )
            )
    except SequenceError:
        raise
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise SequenceError(f"malformed sequence at {directory}: {exc}") from exc
    if not frames:
        raise SequenceError(f"sequence at {directory} lists no frames")
    return frames


def back_project_frame(frame: Frame) -> tuple[np.ndarray, np.ndarray]:
    """All valid-depth pixels to world points; returns (points, flat pixel index)."""
    h, w = frame.depth.shape
    vs, us = np.nonzero(frame.depth > 0)
    z = frame.depth[vs, us]
    cam = np.stack(
        [(us - frame.cx) * z / frame.fx, (vs - frame.cy) * z / frame.fy, z], axis=1
    )
    world = cam @ frame.rotation.T + frame.translation
    return world, vs * w + us


# --- demo sequence -----------------------------------------------------------

_DEMO_W, _DEMO_H = 160, 120
_DEMO_F = 140.0


def _look_at(eye, target):
    fwd = target - eye
    fwd = fwd / np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0])
    x = np.cross(fwd, up)
    x = x / np.linalg.norm(x)
    y = np.cross(fwd, x)
    return np.stack([x, y, fwd], axis=1)


def _demo_objects(rng):
    """Floating primitives with distinct extents and heights (no floor, so
    naive voxel clustering separates them cleanly)."""
    pts = []
    # small cube, low
    c = np.array([0.0, 0.0, 0.4])
    cube = rng.uniform(-1, 1, size=(4000, 3))
    face = rng.integers(0, 3, size=4000)
    cube[np.arange(4000), face] = np.sign(cube[np.arange(4000), face])
    pts.append(cube * 0.12 + c)
    # wide box, mid height
    c = np.array([0.9, 0.3, 1.0])
    box = rng.uniform(-1, 1, size=(6000, 3))
    face = rng.integers(0, 3, size=6000)
    box[np.arange(6000), face] = np.sign(box[np.arange(6000), face])
    pts.append(box * np.array([0.35, 0.25, 0.18]) + c)
    # sphere, high
    c = np.array([-0.7, 0.6, 1.7])
    s = rng.normal(size=(5000, 3))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    pts.append(s * 0.2 + c)
    return pts


def make_demo_sequence(out_dir, frames: int = 6, seed: int = 0) -> Path:
    """Writes a small synthetic depth sequence orbiting three objects."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    points = np.vstack(_demo_objects(rng))
    center = points.mean(axis=0)

    entries = []
    for i in range(frames):
        ang = 2 * np.pi * i / max(frames, 1)
        eye = center + np.array([2.8 * np.cos(ang), 2.8 * np.sin(ang), 0.3])
        rot = _look_at(eye, center)
        cam = (points - eye) @ rot
        z = cam[:, 2]
        u = np.rint(_DEMO_F * cam[:, 0] / z + _DEMO_W / 2).astype(np.int64)
        v = np.rint(_DEMO_F * cam[:, 1] / z + _DEMO_H / 2).astype(np.int64)
        ok = (z > 0.1) & (u >= 0) & (u < _DEMO_W) & (v >= 0) & (v < _DEMO_H)
        depth = np.full(_DEMO_H * _DEMO_W, np.inf)
        np.minimum.at(depth, v[ok] * _DEMO_W + u[ok], z[ok])
        depth[~np.isfinite(depth)] = 0.0
        depth = np.round(depth.reshape(_DEMO_H, _DEMO_W), 4)
        name = f"depth_{i:04d}.f32"
        (out / name).write_bytes(depth.astype("<f4").tobytes())
        entries.append(
            {
                "depth": name,
                "width": _DEMO_W,
                "height": _DEMO_H,
                "fx": _DEMO_F,
                "fy": _DEMO_F,
                "cx": _DEMO_W / 2,
                "cy": _DEMO_H / 2,
                "rotation": rot.tolist(),
                "translation": eye.tolist(),
            }
        )
    (out / SEQUENCE_MANIFEST).write_text(json.dumps({"frames": entries}, indent=2), encoding="utf-8")
    return out


def write_subsequence(src_dir, dst_dir, frame_indices) -> Path:
    """New sequence directory holding a subset of another sequence's frames."""
    src_dir, dst_dir = Path(src_dir), Path(dst_dir)
    doc = json.loads((src_dir / SEQUENCE_MANIFEST).read_text(encoding="utf-8"))
    dst_dir.mkdir(parents=True, exist_ok=True)
    picked = []
    for i in frame_indices:
        entry = dict(doc["frames"][i])
        shutil.copyfile(src_dir / entry["depth"], dst_dir / entry["depth"])
        if entry.get("rgb"):
            shutil.copyfile(src_dir / entry["rgb"], dst_dir / entry["rgb"])
        picked.append(entry)
    (dst_dir / SEQUENCE_MANIFEST).write_text(json.dumps({"frames": picked}, indent=2), encoding="utf-8")
    return dst_dir

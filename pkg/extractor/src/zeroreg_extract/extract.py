"""Bundle extraction: sequence in, validated bundle directory out."""

from __future__ import annotations

import hashlib
from pathlib import Path

from .bundle_writer import BundleData, write_bundle_dir
from .config import ExtractorConfig
from .errors import EmptySceneError
from .sequence import read_sequence


def extract_bundle(config: ExtractorConfig, out_dir) -> Path:
    frames = read_sequence(config.input)[: config.views_per_bundle]
    if config.backend == "mock":
        from .mock_backend import run_mock

        masks, feats, geoms = run_mock(frames, config)
    else:
        from .real_backend import run_real

        masks, feats, geoms = run_real(frames, config)
    if not masks:
        raise EmptySceneError("extraction produced no object masks")

    seq_tag = hashlib.sha256(str(Path(config.input).resolve()).encode()).hexdigest()[:8]
    data = BundleData(bundle_id=f"extract-{config.backend}-{seq_tag}-{config.seed}")
    for view_id, fr in enumerate(frames):
        h, w = fr.depth.shape
        data.frames.append(
            {
                "view_id": view_id,
                "intrinsics": {"fx": fr.fx, "fy": fr.fy, "cx": fr.cx, "cy": fr.cy, "width": w, "height": h},
                "pose": {"rotation": fr.rotation.tolist(), "translation": fr.translation.tolist()},
                "depth": fr.depth.astype("float32"),
            }
        )
    data.masks = masks
    data.semantic_features = feats
    data.geometric_sets = geoms
    data.provenance = {
        "backend": config.backend,
        "prompt_template": config.prompt_template,
        "detector_id": config.detector_id,
        "segmenter_id": config.segmenter_id,
        "embedder_id": config.embedder_id,
        "matcher_id": config.matcher_id,
        "views_per_bundle": config.views_per_bundle,
        "seed": config.seed,
    }
    return write_bundle_dir(data, out_dir)

"""Foundation-model backend: open-vocabulary detection, box-prompted
segmentation, CLIP text embedding of category labels, and dense keypoint
descriptors, all loaded lazily by model id. Never exercised in CI; every
load or inference failure surfaces as BackendError.
"""

from __future__ import annotations

import numpy as np

from .config import ExtractorConfig
from .errors import BackendError, EmptySceneError
from .sequence import Frame

# candidate vocabulary for detectors that need text queries
DETECTION_VOCABULARY = (
    "chair", "table", "sofa", "lamp", "shelf", "monitor",
    "plant", "cabinet", "bed", "desk", "rug", "mirror",
    "box", "bottle", "book", "cup",
)

_DETECTION_THRESHOLD = 0.25


class RealBackend:
    def __init__(self, config: ExtractorConfig):
        self.config = config
        try:
            import torch  # noqa: F401
            from PIL import Image  # noqa: F401
            from transformers import (
                AutoModel,
                AutoProcessor,
                CLIPModel,
                CLIPProcessor,
                SamModel,
                SamProcessor,
                pipeline,
            )
        except Exception as exc:
            raise BackendError(f"real backend imports unavailable: {exc}") from exc
        self._Image = Image
        try:
            self.detector = pipeline(
                "zero-shot-object-detection", model=config.detector_id, device=config.device
            )
            self.sam = SamModel.from_pretrained(config.segmenter_id).to(config.device)
            self.sam_processor = SamProcessor.from_pretrained(config.segmenter_id)
            self.clip = CLIPModel.from_pretrained(config.embedder_id).to(config.device)
            self.clip_processor = CLIPProcessor.from_pretrained(config.embedder_id)
            self.matcher_processor = AutoProcessor.from_pretrained(config.matcher_id)
            self.matcher = AutoModel.from_pretrained(config.matcher_id).to(config.device)
        except Exception as exc:
            raise BackendError(f"model load failure: {exc}") from exc

    def _load_rgb(self, frame: Frame):
        if frame.rgb_path is None or not frame.rgb_path.is_file():
            raise BackendError(f"real backend needs RGB for every frame; missing {frame.rgb_path}")
        return self._Image.open(frame.rgb_path).convert("RGB")

    def _detect(self, image):
        return [
            d
            for d in self.detector(image, candidate_labels=list(DETECTION_VOCABULARY))
            if d["score"] >= _DETECTION_THRESHOLD
        ]

    def _segment(self, image, boxes):
        import torch

        inputs = self.sam_processor(
            image, input_boxes=[[list(b) for b in boxes]], return_tensors="pt"
        ).to(self.config.device)
        with torch.no_grad():
            outputs = self.sam(**inputs)
        masks = self.sam_processor.image_processor.post_process_masks(
            outputs.pred_masks.cpu(),
            inputs["original_sizes"].cpu(),
            inputs["reshaped_input_sizes"].cpu(),
        )[0]
        # best-scoring mask per box
        best = outputs.iou_scores[0].argmax(dim=-1).cpu()
        return [np.asarray(masks[i, best[i]].numpy(), dtype=bool) for i in range(len(boxes))]

    def _embed_labels(self, labels):
        import torch

        prompts = [self.config.prompt_template.format(lbl) for lbl in labels]
        inputs = self.clip_processor(text=prompts, return_tensors="pt", padding=True).to(
            self.config.device
        )
        with torch.no_grad():
            feats = self.clip.get_text_features(**inputs).cpu().numpy()
        return feats / np.linalg.norm(feats, axis=1, keepdims=True)

    def _describe(self, image, union_mask):
        """Dense keypoints plus L2-normalized descriptors inside the mask union."""
        import torch

        arr = np.asarray(image, dtype=np.float64) / 255.0
        arr = arr * union_mask[:, :, None]
        masked = self._Image.fromarray((arr * 255).astype(np.uint8))
        inputs = self.matcher_processor(masked, return_tensors="pt").to(self.config.device)
        with torch.no_grad():
            out = self.matcher(**inputs)
        try:
            kp = out.keypoints[0].cpu().numpy()
            desc = out.descriptors[0].cpu().numpy()
        except AttributeError as exc:
            raise BackendError(f"matcher {self.config.matcher_id} lacks keypoint outputs") from exc
        if kp.max() <= 1.0:  # normalized coordinates
            kp = kp * np.array([image.width - 1, image.height - 1])
        inside = union_mask[
            np.clip(np.rint(kp[:, 1]).astype(int), 0, union_mask.shape[0] - 1),
            np.clip(np.rint(kp[:, 0]).astype(int), 0, union_mask.shape[1] - 1),
        ]
        kp, desc = kp[inside], desc[inside]
        norms = np.linalg.norm(desc, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return kp, desc / norms

    def run(self, frames: list[Frame]):
        masks, feats, geoms = [], [], []
        detected_any = False
        for view_id, frame in enumerate(frames):
            image = self._load_rgb(frame)
            try:
                detections = self._detect(image)
                if not detections:
                    continue
                boxes = [
                    (d["box"]["xmin"], d["box"]["ymin"], d["box"]["xmax"], d["box"]["ymax"])
                    for d in detections
                ]
                seg_masks = self._segment(image, boxes)
                labels = [d["label"].strip().lower() for d in detections]
                vectors = self._embed_labels(labels)
            except BackendError:
                raise
            except Exception as exc:
                raise BackendError(f"inference failed on view {view_id}: {exc}") from exc
            union = np.zeros(frame.depth.shape, dtype=bool)
            mask_id = 0
            for label, vec, mask in zip(labels, vectors, seg_masks):
                if not mask.any():
                    continue
                masks.append(
                    {"view_id": view_id, "mask_id": mask_id, "category_label": label, "mask": mask}
                )
                feats.append(
                    {"mask_ref": (view_id, mask_id), "vector": vec.astype(np.float32)}
                )
                union |= mask
                mask_id += 1
                detected_any = True
            if not union.any():
                continue
            try:
                kp, desc = self._describe(image, union)
            except BackendError:
                raise
            except Exception as exc:
                raise BackendError(f"descriptor extraction failed on view {view_id}: {exc}") from exc
            valid = frame.depth[
                np.clip(np.rint(kp[:, 1]).astype(int), 0, frame.depth.shape[0] - 1),
                np.clip(np.rint(kp[:, 0]).astype(int), 0, frame.depth.shape[1] - 1),
            ] > 0
            if valid.sum() == 0:
                continue
            geoms.append(
                {
                    "view_id": view_id,
                    "pixels": kp[valid].astype(np.float32),
                    "descriptors": desc[valid].astype(np.float32),
                }
            )
        if not detected_any:
            raise EmptySceneError("no detections on any frame")
        return masks, feats, geoms


def run_real(frames: list[Frame], config: ExtractorConfig):
    return RealBackend(config).run(frames)

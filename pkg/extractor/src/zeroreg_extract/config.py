import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

DEFAULT_PROMPT_TEMPLATE = "a photo of a {}"


@dataclass
class ExtractorConfig:
    backend: str = "mock"  # "mock" or "real"
    detector_id: str = ""
    segmenter_id: str = ""
    embedder_id: str = ""
    matcher_id: str = ""
    input: str = ""
    views_per_bundle: int = 3
    device: str = "cpu"
    seed: int = 0
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE

    def __post_init__(self):
        if self.backend not in ("mock", "real"):
            raise ConfigError(f"backend must be 'mock' or 'real', got {self.backend!r}")
        if self.views_per_bundle < 1:
            raise ConfigError("views_per_bundle must be >= 1")
        model_ids = [self.detector_id, self.segmenter_id, self.embedder_id, self.matcher_id]
        if self.backend == "mock" and any(model_ids):
            raise ConfigError("backend=mock takes no model identifiers")
        if self.backend == "real" and not all(model_ids):
            raise ConfigError(
                "backend=real needs detector_id, segmenter_id, embedder_id, and matcher_id"
            )
        if not self.input:
            raise ConfigError("input sequence path is required")


def load_config(path) -> ExtractorConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {f.name for f in fields(ExtractorConfig)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExtractorConfig(**doc)

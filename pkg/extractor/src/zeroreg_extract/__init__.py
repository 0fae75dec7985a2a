"""Scene-bundle extraction from RGB-D sequences.

The mock backend synthesizes labels, semantic features, and descriptors
deterministically from depth geometry; the real backend wraps detection,
box-prompted segmentation, label embedding, and dense keypoint description
models. Both write the same bundle directory format the registration engine
reads.
"""

from .config import ExtractorConfig, load_config
from .extract import extract_bundle

__version__ = "0.1.0"

__all__ = ["ExtractorConfig", "load_config", "extract_bundle", "__version__"]

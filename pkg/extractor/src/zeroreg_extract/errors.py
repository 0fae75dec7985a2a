class ExtractorError(Exception):
    """Base class for extractor failures."""


class ConfigError(ExtractorError):
    """Invalid extractor configuration."""


class SequenceError(ExtractorError):
    """RGB-D input sequence is missing or malformed."""


class BackendError(ExtractorError):
    """A model backend failed to load or run."""


class EmptySceneError(ExtractorError):
    """No object was detected in any frame."""


class WriteError(ExtractorError):
    """Bundle output could not be written."""

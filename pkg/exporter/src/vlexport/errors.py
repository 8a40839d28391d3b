class ExportError(Exception):
    """Base class for exporter failures."""


class ModelResolutionError(ExportError):
    """Checkpoint, processor, or tokenizer could not be loaded."""


class DatasetError(ExportError):
    """Input images, captions, or class lists are missing or malformed."""


class DimensionMismatchError(ExportError):
    """A batch produced features whose width disagrees with the header."""

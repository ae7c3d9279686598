"""Batch image-embedding extraction with a pluggable frozen backbone."""

from .extract import ExtractionConfig, ExtractionResult, extract

__version__ = "0.1.0"

__all__ = ["ExtractionConfig", "ExtractionResult", "extract", "__version__"]

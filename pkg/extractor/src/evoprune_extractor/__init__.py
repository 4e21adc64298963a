"""Frozen-backbone image feature extraction into the EPTL feature format."""

from .features import ExtractionError, ExtractSpec, extract, write_feature_file

__version__ = "0.1.0"

__all__ = ["ExtractSpec", "ExtractionError", "extract", "write_feature_file"]

"""Duplicate-question detection with a CNN over word embeddings."""

__version__ = "0.1.0"

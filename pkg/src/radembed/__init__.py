"""Radical-aware character embeddings and a neural CRF word segmenter."""

__version__ = "0.1.0"

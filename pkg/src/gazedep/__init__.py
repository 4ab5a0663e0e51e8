"""Sequence-labeling dependency parsing with gaze features as auxiliary training tasks."""

__version__ = "0.1.0"

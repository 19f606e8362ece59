"""Robustness-carbon trade-off benchmark for adversarially trained classifiers."""

__version__ = "0.1.0"

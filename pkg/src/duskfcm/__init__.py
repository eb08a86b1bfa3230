"""Dual-spatial kernelized fuzzy c-means segmentation toolkit."""

__version__ = "0.1.0"

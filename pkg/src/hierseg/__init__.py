"""Hierarchical image segmentation from contour maps via sparse boundaries."""
__version__ = "0.1.0"

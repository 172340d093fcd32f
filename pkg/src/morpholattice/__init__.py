"""Joint morphological segmentation and multi-tagging over morphological lattices."""

__version__ = "0.1.0"

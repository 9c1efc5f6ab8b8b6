"""Few-shot conditional FCN toolkit for histopathology slide segmentation."""

__version__ = "0.1.0"

"""annoseg: handwritten-annotation segmentation toolkit.

Pipeline pieces: PAGE-XML ground-truth rasterization, patch samplers,
a small from-scratch fully convolutional segmentation network, tiled
overlap-averaged inference, IoU evaluation, and a synthetic document
generator for end-to-end runs without real data.
"""

__version__ = "0.1.0"

from . import backend

__all__ = ["backend", "__version__"]

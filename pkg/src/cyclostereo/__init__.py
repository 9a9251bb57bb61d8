"""Cyclopean-coordinate stereo pipeline.

Exact half-grid geometry between the left/right and cyclopean systems, a
constrained per-scanline dynamic program recovering disparity together with
occlusion and homogeneity flags, monocular-prior gap completion, an
evaluation suite, and a synthetic-scene harness with exact ground truth.
"""

from .geometry import (CyclopeanCoord, EpipolarGeometry, cyclopean_depth,
                       cyclopean_to_lr, lr_depth_bias, lr_to_cyclopean)

__version__ = "0.1.0"

__all__ = [
    "CyclopeanCoord",
    "EpipolarGeometry",
    "cyclopean_depth",
    "cyclopean_to_lr",
    "lr_depth_bias",
    "lr_to_cyclopean",
]

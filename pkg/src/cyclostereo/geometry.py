"""Coordinate algebra between the left/right pixel systems and the cyclopean
(x, d) system, plus disparity/depth conversions.

Conventions used throughout the package:
  * x = (l + r) / 2,  d = (l - r) / 2, so d >= 0 for rectified pairs where
    content shifts leftward in the right image. l = x + d, r = x - d.
  * x and d live on the half-pixel grid and are stored as integer
    twice-values (x2 = 2x, d2 = 2d) so round trips and constraint checks
    are exact. d2 also equals the full left-right pixel disparity l - r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class GeometryError(ValueError):
    pass


def to_twice(value, name="value"):
    """Convert a half-grid coordinate to its integer twice-value."""
    v2 = value * 2.0
    r = round(v2)
    if v2 != r:
        raise GeometryError(f"{name}={value!r} is not a multiple of 1/2")
    return int(r)


@dataclass(frozen=True)
class EpipolarGeometry:
    """Calibration and grid parameters for one rectified stereo pair.

    max_disparity_c caps the cyclopean disparity d; the corresponding cap on
    the full pixel disparity l - r is 2 * max_disparity_c.
    """

    focal_length_px: float
    baseline: float
    width: int
    height: int
    max_disparity_c: int
    disparity_offset: float = 0.0

    def __post_init__(self):
        if not (self.focal_length_px > 0):
            raise GeometryError("focal_length_px must be > 0")
        if not (self.baseline > 0):
            raise GeometryError("baseline must be > 0")
        if self.width < 2:
            raise GeometryError("width must be >= 2")
        if self.height < 1:
            raise GeometryError("height must be >= 1")
        if not (0 < self.max_disparity_c <= (self.width - 1) / 2):
            raise GeometryError(
                f"max_disparity_c={self.max_disparity_c} outside (0, (width-1)/2]")

    @property
    def nx(self):
        """Number of cyclopean width samples (the half grid has 2N of them)."""
        return 2 * self.width

    @property
    def nd(self):
        """Number of disparity levels on the twice-value grid, d2 = 0..2*d_max."""
        return 2 * self.max_disparity_c + 1


@dataclass(frozen=True)
class CyclopeanCoord:
    """A cyclopean coordinate stored as integer twice-values."""

    x2: int
    d2: int

    @property
    def x(self):
        return self.x2 / 2.0

    @property
    def d(self):
        return self.d2 / 2.0

    @property
    def l2(self):
        return self.x2 + self.d2

    @property
    def r2(self):
        return self.x2 - self.d2


def lr_to_cyclopean(l, r, width):
    """Map a left/right match (l, r) to its cyclopean coordinate.

    l and r must be half-grid coordinates inside [0, width-1]. x = (l+r)/2
    lands on the half grid only when l and r are both integers or both
    half-integers; mixed parity is rejected.
    """
    l2 = to_twice(l, "l")
    r2 = to_twice(r, "r")
    if not (0 <= l2 <= 2 * (width - 1)):
        raise GeometryError(f"l={l} outside [0, {width - 1}]")
    if not (0 <= r2 <= 2 * (width - 1)):
        raise GeometryError(f"r={r} outside [0, {width - 1}]")
    if (l2 + r2) % 2 != 0:
        raise GeometryError(
            "l and r must both be integers or both half-integers for an exact "
            "half-grid cyclopean coordinate")
    return CyclopeanCoord(x2=(l2 + r2) // 2, d2=(l2 - r2) // 2)


def cyclopean_to_lr(x, d, width):
    """Invert the cyclopean map: l = x + d, r = x - d.

    Raises when the implied pixel coordinates fall outside [0, width-1].
    """
    x2 = to_twice(x, "x")
    d2 = to_twice(d, "d")
    l2 = x2 + d2
    r2 = x2 - d2
    if not (0 <= l2 <= 2 * (width - 1)):
        raise GeometryError(f"implied l={l2 / 2} outside [0, {width - 1}]")
    if not (0 <= r2 <= 2 * (width - 1)):
        raise GeometryError(f"implied r={r2 / 2} outside [0, {width - 1}]")
    return l2 / 2.0, r2 / 2.0


def cyclopean_depth(d, geom):
    """Depth of a match with cyclopean disparity d.

    The denominator uses the full pixel disparity 2*d plus the calibration
    disparity offset: depth = f * B / (2*d + doffs).
    """
    denom = 2.0 * d + geom.disparity_offset
    if denom <= 0:
        raise GeometryError(
            f"disparity at or beyond infinity: 2*{d} + doffs={geom.disparity_offset}")
    return geom.focal_length_px * geom.baseline / denom


def lr_depth_bias(depth_c, lateral_offset, baseline):
    """Depths measured from the left/right camera centers for a point at
    cyclopean depth depth_c, laterally offset (world units, signed) from the
    cyclopean axis.

    Both are >= depth_c; swapping the sign of the offset swaps the pair.
    """
    if not (depth_c > 0):
        raise GeometryError("depth_c must be > 0")
    half_b = baseline / 2.0
    depth_l = math.sqrt(depth_c * depth_c + (half_b - lateral_offset) ** 2)
    depth_r = math.sqrt(depth_c * depth_c + (half_b + lateral_offset) ** 2)
    return depth_l, depth_r

"""Raster grid carrier and exact geotransform arithmetic.

Only axis-aligned, north-up grids are supported: pixel sizes are stored as
positive numbers and the y step is applied with a negative sign. The CRS is
an opaque compatibility tag; two grids either share it or cannot be combined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class SampleKind(str, Enum):
    SAR_DN = "sar_dn"
    SAR_DB = "sar_db"
    LABEL = "label_class"


class CoregistrationError(ValueError):
    """Grids do not share shape, transform, and CRS tag."""


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel <-> map mapping for an axis-aligned, north-up grid.

    ``origin_x``/``origin_y`` locate the outer corner of pixel (0, 0);
    pixel (col, row) covers [col, col+1) x [row, row+1) in pixel space.
    """

    origin_x: float
    origin_y: float
    pixel_width: float
    pixel_height: float  # stored positive, applied with negative sign

    def __post_init__(self):
        if not (self.pixel_width > 0 and self.pixel_height > 0):
            raise ValueError("pixel sizes must be positive")

    def pixel_to_world(self, col: float, row: float) -> tuple[float, float]:
        return (
            self.origin_x + col * self.pixel_width,
            self.origin_y - row * self.pixel_height,
        )

    def world_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        return (
            (x - self.origin_x) / self.pixel_width,
            (self.origin_y - y) / self.pixel_height,
        )


@dataclass(frozen=True)
class RasterGrid:
    """Single-band raster with geotransform, nodata sentinel, and CRS tag.

    ``samples`` is a 2-D array indexed [row, col]. The array is frozen after
    construction so grids can be shared freely across threads and workers;
    operations always allocate fresh outputs.
    """

    samples: np.ndarray
    kind: SampleKind
    nodata: float
    transform: GeoTransform
    crs_tag: str = ""

    def __post_init__(self):
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {self.samples.shape}")
        self.samples.setflags(write=False)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    def valid_mask(self) -> np.ndarray:
        """Boolean array of pixels that hold data (NaN-aware nodata compare)."""
        if isinstance(self.nodata, float) and math.isnan(self.nodata):
            return ~np.isnan(self.samples)
        return self.samples != self.nodata


def coregistered(a: RasterGrid, b: RasterGrid) -> bool:
    """True iff the grids share shape, transform, and CRS tag exactly."""
    return (
        a.samples.shape == b.samples.shape
        and a.transform == b.transform
        and a.crs_tag == b.crs_tag
    )


def require_coregistered(a: RasterGrid, b: RasterGrid) -> None:
    if not coregistered(a, b):
        raise CoregistrationError(
            f"grids are not co-registered: {a.samples.shape}/{a.transform}/{a.crs_tag!r}"
            f" vs {b.samples.shape}/{b.transform}/{b.crs_tag!r}"
        )


def world_bounds(grid: RasterGrid) -> tuple[float, float, float, float]:
    """(min_x, min_y, max_x, max_y) of the grid footprint in map units."""
    x0, y0 = grid.transform.pixel_to_world(0, 0)
    x1, y1 = grid.transform.pixel_to_world(grid.width, grid.height)
    return (x0, y1, x1, y0)

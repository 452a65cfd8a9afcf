"""Conversion of raw SAR amplitude counts to calibrated backscatter in dB."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RasterGrid, SampleKind

DEFAULT_CALIBRATION_FACTOR = -83.0
DB_NODATA = float("nan")


@dataclass(frozen=True)
class CalibrationTable:
    """How to map digital numbers to sigma-nought dB.

    ``mode`` selects between the closed-form conversion
    ``20*log10(dn) + cf`` and a sensor lookup table interpolated linearly
    over ``table`` rows of (dn, db). Table rows must be strictly increasing
    in dn and non-decreasing in db; counts outside the tabulated range clamp
    to the end values, matching how published sensor tables are specified.
    """

    mode: str = "formula"
    cf: float = DEFAULT_CALIBRATION_FACTOR
    table: tuple[tuple[float, float], ...] = field(default_factory=tuple)
    sensor_id: str = ""

    def __post_init__(self):
        if self.mode not in ("formula", "lookup"):
            raise ValueError(f"unknown calibration mode {self.mode!r}")
        if self.mode == "lookup":
            if len(self.table) < 2:
                raise ValueError("lookup calibration needs at least two table rows")
            dns = [row[0] for row in self.table]
            dbs = [row[1] for row in self.table]
            if any(b <= a for a, b in zip(dns, dns[1:])):
                raise ValueError("lookup dn values must be strictly increasing")
            if any(b < a for a, b in zip(dbs, dbs[1:])):
                raise ValueError("lookup db values must be non-decreasing")
            if dns[0] <= 0:
                raise ValueError("lookup dn values must be positive")


def calibrate_db(grid: RasterGrid, cal: CalibrationTable | None = None) -> RasterGrid:
    """Convert a raw-count grid to float32 dB.

    Nodata counts become NaN. A zero count anywhere else is treated as
    nodata too (log of zero has no finite dB value, and zero fill is how
    margins arrive). Genuinely negative counts cannot occur in uint16 input
    but are rejected if a caller feeds synthetic data containing them.
    """
    if grid.kind != SampleKind.SAR_DN:
        raise ValueError("calibration input must be a raw-count grid")
    if cal is None:
        cal = CalibrationTable()
    dn = np.asarray(grid.samples, dtype=np.float64)
    if np.any(dn < 0):
        raise ValueError("negative counts cannot be calibrated")
    invalid = ~grid.valid_mask() | (dn == 0)
    safe = np.where(invalid, 1.0, dn)
    if cal.mode == "formula":
        db = 20.0 * np.log10(safe) + cal.cf
    else:
        xs = np.array([row[0] for row in cal.table], dtype=np.float64)
        ys = np.array([row[1] for row in cal.table], dtype=np.float64)
        db = np.interp(safe, xs, ys)
    out = db.astype(np.float32)
    out[invalid] = np.float32(DB_NODATA)
    return RasterGrid(
        samples=out,
        kind=SampleKind.SAR_DB,
        nodata=DB_NODATA,
        transform=grid.transform,
        crs_tag=grid.crs_tag,
    )

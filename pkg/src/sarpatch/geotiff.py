"""GeoTIFF reading and writing for single-band, axis-aligned rasters.

Backed by tifffile. Only the subset this pipeline needs is supported: one
band, strip or tiled layout, uncompressed or deflate, no rotation. Sample
types follow the product conventions: uint16 raw SAR amplitudes, float32
calibrated dB, uint8 land-cover classes.

The CRS is carried as an opaque string. Tags of the form ``EPSG:nnnn`` are
written as standard geokeys (and recognized when reading foreign files);
any other non-empty tag round-trips through the citation geokey. No
reprojection is ever attempted.
"""

from __future__ import annotations

import math
import re

import numpy as np
import tifffile

from .grid import GeoTransform, RasterGrid, SampleKind

TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922
TAG_MODEL_TRANSFORMATION = 34264
TAG_GEO_KEY_DIRECTORY = 34735
TAG_GEO_ASCII_PARAMS = 34737
TAG_GDAL_NODATA = 42113

GEOKEY_MODEL_TYPE = 1024
GEOKEY_CITATION = 1026
GEOKEY_GEOGRAPHIC_TYPE = 2048
GEOKEY_PROJECTED_TYPE = 3072

_KIND_BY_DTYPE = {
    np.dtype(np.uint16): SampleKind.SAR_DN,
    np.dtype(np.float32): SampleKind.SAR_DB,
    np.dtype(np.uint8): SampleKind.LABEL,
}


class GeoreferenceError(ValueError):
    """Required georeferencing tags are absent."""


class LayoutError(ValueError):
    """The file layout is outside the supported single-band subset."""


def default_nodata(kind: SampleKind) -> float:
    """Fallback nodata when the file carries no GDAL_NODATA tag.

    Zero-filled margins for raw amplitudes and labels, NaN for dB.
    """
    return float("nan") if kind == SampleKind.SAR_DB else 0


def _parse_crs_tag(tags) -> str:
    if TAG_GEO_KEY_DIRECTORY not in tags:
        return ""
    directory = tags[TAG_GEO_KEY_DIRECTORY].value
    ascii_params = ""
    if TAG_GEO_ASCII_PARAMS in tags:
        ascii_params = tags[TAG_GEO_ASCII_PARAMS].value
    n_keys = int(directory[3])
    entries = {}
    for k in range(n_keys):
        key_id, location, count, value = directory[4 + 4 * k : 8 + 4 * k]
        entries[int(key_id)] = (int(location), int(count), int(value))
    for key in (GEOKEY_PROJECTED_TYPE, GEOKEY_GEOGRAPHIC_TYPE):
        if key in entries and entries[key][0] == 0:
            code = entries[key][2]
            if 0 < code < 32767:
                return f"EPSG:{code}"
    if GEOKEY_CITATION in entries:
        location, count, offset = entries[GEOKEY_CITATION]
        if location == TAG_GEO_ASCII_PARAMS:
            return ascii_params[offset : offset + count].rstrip("|\x00")
    return ""


def _crs_extratags(crs_tag: str) -> list:
    if not crs_tag:
        return []
    citation = crs_tag + "|"
    keys = [(GEOKEY_CITATION, TAG_GEO_ASCII_PARAMS, len(citation), 0)]
    match = re.fullmatch(r"EPSG:(\d+)", crs_tag)
    if match:
        code = int(match.group(1))
        # geographic EPSG codes live in the 4000s; everything else is
        # treated as projected for geokey placement
        geographic = 4000 <= code <= 4999
        keys.append((GEOKEY_MODEL_TYPE, 0, 1, 2 if geographic else 1))
        keys.append(
            (GEOKEY_GEOGRAPHIC_TYPE if geographic else GEOKEY_PROJECTED_TYPE, 0, 1, code)
        )
    keys.sort()
    directory = [1, 1, 0, len(keys)]
    for entry in keys:
        directory.extend(entry)
    return [
        (TAG_GEO_KEY_DIRECTORY, "H", len(directory), tuple(directory)),
        (TAG_GEO_ASCII_PARAMS, "s", None, citation),
    ]


def _format_nodata(nodata: float) -> str:
    value = float(nodata)
    if math.isnan(value):
        return "nan"
    if value.is_integer():
        return str(int(value))
    return repr(value)


def read_geotiff(path, kind: SampleKind | None = None) -> RasterGrid:
    """Read a single-band GeoTIFF into a RasterGrid.

    The sample kind is inferred from the stored dtype (uint16 -> raw SAR,
    float32 -> dB, uint8 -> labels) unless overridden. Raises
    GeoreferenceError when pixel-scale/tiepoint tags are missing and
    LayoutError for multi-band, rotated, or unsupported sample types.
    """
    with tifffile.TiffFile(path) as tif:
        if len(tif.pages) != 1:
            raise LayoutError(f"{path}: expected exactly one image, found {len(tif.pages)}")
        page = tif.pages[0]
        if page.samplesperpixel != 1:
            raise LayoutError(f"{path}: multi-band rasters are not supported")
        tags = page.tags
        if TAG_MODEL_TRANSFORMATION in tags:
            m = tags[TAG_MODEL_TRANSFORMATION].value
            if m[1] != 0 or m[4] != 0:
                raise LayoutError(f"{path}: rotated geotransforms are not supported")
        if TAG_MODEL_PIXEL_SCALE not in tags or TAG_MODEL_TIEPOINT not in tags:
            raise GeoreferenceError(
                f"{path}: missing ModelPixelScale/ModelTiepoint georeferencing tags"
            )
        scale = tags[TAG_MODEL_PIXEL_SCALE].value
        tie = tags[TAG_MODEL_TIEPOINT].value
        pixel_width, pixel_height = float(scale[0]), float(scale[1])
        i, j, _, x, y, _ = (float(v) for v in tie[:6])
        transform = GeoTransform(
            origin_x=x - i * pixel_width,
            origin_y=y + j * pixel_height,
            pixel_width=pixel_width,
            pixel_height=pixel_height,
        )
        samples = page.asarray()
        if samples.ndim != 2:
            raise LayoutError(f"{path}: expected a 2-D single-band image")
        if samples.dtype not in _KIND_BY_DTYPE:
            raise LayoutError(f"{path}: unsupported sample type {samples.dtype}")
        if kind is None:
            kind = _KIND_BY_DTYPE[samples.dtype]
        if TAG_GDAL_NODATA in tags:
            nodata = float(tags[TAG_GDAL_NODATA].value.rstrip("\x00"))
        else:
            nodata = default_nodata(kind)
        return RasterGrid(
            samples=samples,
            kind=kind,
            nodata=nodata,
            transform=transform,
            crs_tag=_parse_crs_tag(tags),
        )


def write_geotiff(grid: RasterGrid, path, compress: bool = False,
                  description: str | None = None) -> None:
    """Write a RasterGrid as a single-band GeoTIFF.

    Output bytes are deterministic for identical inputs: no timestamps or
    software tags are emitted. ``description`` lands in ImageDescription
    (used by the pipeline for provenance JSON).
    """
    if grid.width == 0 or grid.height == 0:
        raise ValueError("cannot write an empty grid")
    samples = np.asarray(grid.samples)
    if samples.dtype not in _KIND_BY_DTYPE:
        raise ValueError(f"unsupported sample type {samples.dtype}")
    t = grid.transform
    extratags = [
        (TAG_MODEL_PIXEL_SCALE, "d", 3, (t.pixel_width, t.pixel_height, 0.0)),
        (TAG_MODEL_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0)),
    ]
    extratags.extend(_crs_extratags(grid.crs_tag))
    extratags.append((TAG_GDAL_NODATA, "s", None, _format_nodata(grid.nodata)))
    tifffile.imwrite(
        path,
        samples,
        software=False,
        metadata=None,
        description=description or "",
        compression="zlib" if compress else None,
        extratags=extratags,
    )

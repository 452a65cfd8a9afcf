"""Scene-level preprocessing: resolution reduction and label alignment.

These transforms run once per scene before patch extraction. They operate
purely on in-memory grids; file traffic is the pipeline's job.
"""

from __future__ import annotations

import numpy as np

from .grid import GeoTransform, RasterGrid, SampleKind, require_coregistered


def downsample_half(grid: RasterGrid, power_domain: bool = False) -> RasterGrid:
    """Halve resolution by averaging non-nodata members of each 2x2 block.

    The origin corner stays put and both pixel sizes double. A trailing odd
    row or column has no complete block and is dropped. Blocks whose four
    members are all nodata stay nodata; otherwise the mean is taken over the
    valid members only, so scene edges do not bleed toward the fill value.

    With ``power_domain=True`` dB samples are averaged as linear power
    (10^(db/10)) and converted back, which matches how multilooking treats
    intensity. Raw amplitude counts are always averaged as stored.
    """
    if grid.kind == SampleKind.LABEL:
        raise ValueError("label grids downsample by nearest lookup, not averaging")
    if power_domain and grid.kind != SampleKind.SAR_DB:
        raise ValueError("power-domain averaging only applies to dB grids")
    h2, w2 = grid.height // 2, grid.width // 2
    if h2 == 0 or w2 == 0:
        raise ValueError("grid too small to halve")
    samples = np.asarray(grid.samples[: 2 * h2, : 2 * w2], dtype=np.float64)
    valid = grid.valid_mask()[: 2 * h2, : 2 * w2]
    if power_domain:
        work = np.where(valid, np.power(10.0, samples / 10.0), 0.0)
    else:
        work = np.where(valid, samples, 0.0)
    blocks = work.reshape(h2, 2, w2, 2)
    counts = valid.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
    sums = blocks.sum(axis=(1, 3))
    with np.errstate(invalid="ignore"):
        means = sums / np.maximum(counts, 1)
    if power_domain:
        with np.errstate(divide="ignore"):
            means = 10.0 * np.log10(np.maximum(means, 0.0))
    empty = counts == 0
    if grid.kind == SampleKind.SAR_DN:
        out = np.rint(means).astype(np.uint16)
        out[empty] = np.uint16(grid.nodata)
    else:
        out = means.astype(np.float32)
        out[empty] = np.float32(grid.nodata)
    transform = GeoTransform(
        origin_x=grid.transform.origin_x,
        origin_y=grid.transform.origin_y,
        pixel_width=grid.transform.pixel_width * 2.0,
        pixel_height=grid.transform.pixel_height * 2.0,
    )
    return RasterGrid(
        samples=out,
        kind=grid.kind,
        nodata=grid.nodata,
        transform=transform,
        crs_tag=grid.crs_tag,
    )


def merge_label_tiles(tiles: list[RasterGrid], target: RasterGrid) -> RasterGrid:
    """Mosaic label tiles onto the target scene's grid by nearest neighbor.

    Each target pixel center is looked up in every tile; the first tile in
    list order holding a valid label there wins, so callers control overlap
    priority by ordering. Pixels no tile covers stay nodata. Tiles must share
    the target's CRS tag but may have any resolution or extent.
    """
    if not tiles:
        raise ValueError("no label tiles supplied")
    for tile in tiles:
        if tile.kind != SampleKind.LABEL:
            raise ValueError("merge_label_tiles expects label grids")
        if tile.crs_tag != target.crs_tag:
            raise ValueError(
                f"tile CRS {tile.crs_tag!r} does not match target {target.crs_tag!r}"
            )
    nodata = np.uint8(int(tiles[0].nodata))
    out = np.full((target.height, target.width), nodata, dtype=np.uint8)
    filled = np.zeros(out.shape, dtype=bool)
    cols = (np.arange(target.width) + 0.5) * target.transform.pixel_width
    rows = (np.arange(target.height) + 0.5) * target.transform.pixel_height
    xs = target.transform.origin_x + cols
    ys = target.transform.origin_y - rows
    for tile in tiles:
        tcols = np.floor((xs - tile.transform.origin_x) / tile.transform.pixel_width)
        trows = np.floor((tile.transform.origin_y - ys) / tile.transform.pixel_height)
        in_x = (tcols >= 0) & (tcols < tile.width)
        in_y = (trows >= 0) & (trows < tile.height)
        tcols = np.clip(tcols.astype(np.int64), 0, tile.width - 1)
        trows = np.clip(trows.astype(np.int64), 0, tile.height - 1)
        values = np.asarray(tile.samples)[np.ix_(trows, tcols)]
        covered = np.outer(in_y, in_x) & (values != np.uint8(int(tile.nodata)))
        take = covered & ~filled
        out[take] = values[take]
        filled |= take
    return RasterGrid(
        samples=out,
        kind=SampleKind.LABEL,
        nodata=float(nodata),
        transform=target.transform,
        crs_tag=target.crs_tag,
    )


def mask_labels_by_sar(labels: RasterGrid, sar: RasterGrid) -> RasterGrid:
    """Blank labels wherever the coregistered SAR scene has no data.

    Keeps the label raster's support a subset of the imagery's so patch
    validity checks need only consult the SAR mask for geometry and the
    label mask for annotation gaps.
    """
    if labels.kind != SampleKind.LABEL:
        raise ValueError("first argument must be a label grid")
    require_coregistered(labels, sar)
    out = np.asarray(labels.samples).copy()
    out[~sar.valid_mask()] = np.uint8(int(labels.nodata))
    return RasterGrid(
        samples=out,
        kind=SampleKind.LABEL,
        nodata=labels.nodata,
        transform=labels.transform,
        crs_tag=labels.crs_tag,
    )

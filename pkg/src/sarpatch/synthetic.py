"""Synthetic demo workspace: small scenes with knowable structure.

Real inputs are licensed satellite products, so tests and the demo run on
generated stand-ins: a few uint16 scenes with nodata margins, label tiles
at finer resolution whose classes are a pure function of world position
(tiles therefore agree wherever they overlap), a legend, and a config.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import PipelineConfig, save_config
from .geotiff import write_geotiff
from .grid import GeoTransform, RasterGrid, SampleKind
from .legend import example_legend, save_legend
from .rng import derive_seed

CRS = "EPSG:32654"
PIXEL_M = 10.0
LABEL_PIXEL_M = 5.0
CLASS_BLOCK_M = 3200.0
# source-legend ids the block pattern cycles through; 6..10 are forest
# variants, so runs of blocks produce fully-forest patches for the filter
CLASS_CYCLE = (3, 4, 6, 7, 8, 9, 10)
LABEL_NODATA = 0


def class_at(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Source class id as a function of world position (blockwise constant)."""
    bx = np.floor(x / CLASS_BLOCK_M).astype(np.int64)
    by = np.floor(y / CLASS_BLOCK_M).astype(np.int64)
    return np.asarray(CLASS_CYCLE, dtype=np.uint8)[(3 * bx + 5 * by) % len(CLASS_CYCLE)]


def _scene_transform(index: int, size: int) -> GeoTransform:
    # scenes sit in a row with a 2 km gap so footprints never overlap
    west = index * (size * PIXEL_M + 2000.0)
    return GeoTransform(origin_x=west, origin_y=100000.0, pixel_width=PIXEL_M,
                        pixel_height=PIXEL_M)


def make_scene(index: int, size: int, seed: int) -> RasterGrid:
    """One uint16 scene: lognormal-ish counts plus a scripted nodata margin."""
    rng = np.random.default_rng(derive_seed(seed, f"scene-{index}"))
    dn = rng.integers(low=1, high=4000, size=(size, size), dtype=np.uint16)
    if index % 3 == 0:
        dn[:, : size // 8] = 0
    elif index % 3 == 1:
        dn[-size // 8 :, :] = 0
    else:
        dn[: size // 4, -size // 4 :] = 0
    return RasterGrid(
        samples=dn,
        kind=SampleKind.SAR_DN,
        nodata=0,
        transform=_scene_transform(index, size),
        crs_tag=CRS,
    )


def make_label_tiles(scene: RasterGrid, gap_fraction: float = 0.0) -> list[RasterGrid]:
    """Two finer-resolution tiles covering the scene's west and east halves.

    Halves overlap by a small strip to exercise first-wins mosaicking. A
    positive gap_fraction blanks a vertical strip of the east tile to
    nodata, leaving scene pixels no tile can label.
    """
    min_x = scene.transform.origin_x
    max_y = scene.transform.origin_y
    width_m = scene.width * scene.transform.pixel_width
    height_m = scene.height * scene.transform.pixel_height
    overlap_m = 16 * LABEL_PIXEL_M
    tiles = []
    spans = (
        (min_x, min_x + width_m / 2 + overlap_m),
        (min_x + width_m / 2 - overlap_m, min_x + width_m),
    )
    for t_idx, (west, east) in enumerate(spans):
        cols = int(round((east - west) / LABEL_PIXEL_M))
        rows = int(round(height_m / LABEL_PIXEL_M))
        xs = west + (np.arange(cols) + 0.5) * LABEL_PIXEL_M
        ys = max_y - (np.arange(rows) + 0.5) * LABEL_PIXEL_M
        values = class_at(xs[None, :], ys[:, None]).astype(np.uint8)
        if gap_fraction > 0 and t_idx == 1:
            gap_cols = int(cols * gap_fraction)
            if gap_cols:
                values[:, cols // 2 : cols // 2 + gap_cols] = LABEL_NODATA
        tiles.append(
            RasterGrid(
                samples=values,
                kind=SampleKind.LABEL,
                nodata=LABEL_NODATA,
                transform=GeoTransform(
                    origin_x=west, origin_y=max_y,
                    pixel_width=LABEL_PIXEL_M, pixel_height=LABEL_PIXEL_M,
                ),
                crs_tag=CRS,
            )
        )
    return tiles


def build_workspace(root, seed: int = 0, n_scenes: int = 3, scene_size: int = 512,
                    patch_size: int = 64, sample_points: int = 400) -> Path:
    """Write scenes, label tiles, legend, and config under root.

    Returns the config path. The config's patch size defaults to 64 so a
    512-pixel scene still yields a 4x4 window grid after halving.
    """
    root = Path(root)
    scenes_dir = root / "scenes"
    tiles_dir = root / "label_tiles"
    scenes_dir.mkdir(parents=True, exist_ok=True)
    tiles_dir.mkdir(parents=True, exist_ok=True)
    for index in range(n_scenes):
        scene = make_scene(index, scene_size, seed)
        write_geotiff(scene, scenes_dir / f"scene{index:02d}.tif")
        gap = 0.05 if index == n_scenes - 1 else 0.0
        for t_idx, tile in enumerate(make_label_tiles(scene, gap_fraction=gap)):
            write_geotiff(tile, tiles_dir / f"scene{index:02d}_tile{t_idx}.tif")
    save_legend(example_legend(), root / "legend.txt")
    cfg = PipelineConfig(workspace=str(root), patch_size=patch_size,
                         sample_points=sample_points)
    config_path = root / "config.ini"
    save_config(cfg, config_path)
    return config_path

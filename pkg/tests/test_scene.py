import math

import numpy as np
import pytest

from sarpatch.grid import GeoTransform, RasterGrid, SampleKind
from sarpatch.scene import downsample_half, mask_labels_by_sar, merge_label_tiles

from conftest import make_db_grid, make_dn_grid, make_label_grid, make_transform


def oracle_downsample(samples, nodata, as_db=False, power=False):
    """Block-by-block reference: mean of valid members, else nodata."""
    h2, w2 = samples.shape[0] // 2, samples.shape[1] // 2
    out = np.empty((h2, w2), dtype=np.float64)
    for r in range(h2):
        for c in range(w2):
            block = samples[2 * r : 2 * r + 2, 2 * c : 2 * c + 2].astype(np.float64)
            if as_db:
                members = [v for v in block.ravel() if not math.isnan(v)]
            else:
                members = [v for v in block.ravel() if v != nodata]
            if not members:
                out[r, c] = np.nan if as_db else nodata
            elif power:
                mean_pow = sum(10 ** (v / 10) for v in members) / len(members)
                out[r, c] = 10 * math.log10(mean_pow)
            else:
                out[r, c] = sum(members) / len(members)
    return out


def test_downsample_matches_oracle_dn(rng):
    samples = rng.integers(0, 500, size=(10, 14), dtype=np.uint16)
    samples[rng.random((10, 14)) < 0.3] = 0
    grid = make_dn_grid(samples)
    half = downsample_half(grid)
    expected = oracle_downsample(samples, 0)
    rounded = np.where(expected == 0, 0, np.rint(expected))
    np.testing.assert_array_equal(half.samples, rounded.astype(np.uint16))


def test_downsample_geometry_and_odd_trailing_edge():
    samples = np.arange(35, dtype=np.uint16).reshape(5, 7) + 1
    grid = make_dn_grid(samples, transform=make_transform(100.0, 200.0, 10.0))
    half = downsample_half(grid)
    assert half.samples.shape == (2, 3)
    assert half.transform.origin_x == 100.0
    assert half.transform.origin_y == 200.0
    assert half.transform.pixel_width == 20.0
    assert half.transform.pixel_height == 20.0
    assert half.crs_tag == grid.crs_tag


def test_downsample_all_nodata_block_stays_nodata():
    samples = np.array([[0, 0, 5, 7], [0, 0, 9, 11]], dtype=np.uint16)
    half = downsample_half(make_dn_grid(samples))
    assert half.samples[0, 0] == 0
    assert half.samples[0, 1] == 8


def test_downsample_db_stored_domain(rng):
    samples = rng.normal(-15, 3, size=(8, 8)).astype(np.float32)
    samples[0, :2] = np.nan
    half = downsample_half(make_db_grid(samples))
    expected = oracle_downsample(samples.astype(np.float64), None, as_db=True)
    np.testing.assert_allclose(half.samples, expected.astype(np.float32), rtol=1e-6)


def test_downsample_db_power_domain(rng):
    samples = rng.normal(-15, 3, size=(6, 6)).astype(np.float32)
    half = downsample_half(make_db_grid(samples), power_domain=True)
    expected = oracle_downsample(
        samples.astype(np.float64), None, as_db=True, power=True
    )
    np.testing.assert_allclose(half.samples, expected.astype(np.float32), rtol=1e-5)


def test_downsample_rejects_labels_and_power_on_dn():
    labels = make_label_grid(np.ones((4, 4)))
    with pytest.raises(ValueError):
        downsample_half(labels)
    with pytest.raises(ValueError):
        downsample_half(make_dn_grid(np.ones((4, 4))), power_domain=True)


def test_downsample_rejects_tiny_grid():
    with pytest.raises(ValueError):
        downsample_half(make_dn_grid(np.ones((1, 4))))


def oracle_mosaic(tiles, target):
    """Per-pixel scan: first tile whose nearest cell is valid wins."""
    out = np.full((target.height, target.width), int(tiles[0].nodata), dtype=np.uint8)
    for r in range(target.height):
        for c in range(target.width):
            x, y = target.transform.pixel_to_world(c + 0.5, r + 0.5)
            for tile in tiles:
                tc = math.floor((x - tile.transform.origin_x) / tile.transform.pixel_width)
                tr = math.floor((tile.transform.origin_y - y) / tile.transform.pixel_height)
                if 0 <= tc < tile.width and 0 <= tr < tile.height:
                    value = int(np.asarray(tile.samples)[tr, tc])
                    if value != int(tile.nodata):
                        out[r, c] = value
                        break
    return out


def test_merge_label_tiles_matches_oracle(rng):
    target = make_dn_grid(
        rng.integers(1, 9, size=(12, 16), dtype=np.uint16),
        transform=make_transform(1000.0, 2000.0, 10.0),
    )
    tiles = []
    for k, (ox, oy, pixel, shape) in enumerate(
        [
            (995.0, 2003.0, 7.0, (11, 13)),
            (1050.0, 2010.0, 4.0, (25, 30)),
            (980.0, 1995.0, 13.0, (9, 9)),
        ]
    ):
        samples = rng.integers(0, 6, size=shape, dtype=np.uint8)
        tiles.append(
            make_label_grid(
                samples,
                transform=GeoTransform(
                    origin_x=ox, origin_y=oy, pixel_width=pixel, pixel_height=pixel
                ),
            )
        )
    merged = merge_label_tiles(tiles, target)
    np.testing.assert_array_equal(merged.samples, oracle_mosaic(tiles, target))
    assert merged.transform == target.transform
    assert merged.kind == SampleKind.LABEL


def test_merge_first_tile_wins_in_overlap():
    target = make_dn_grid(np.ones((2, 2)), transform=make_transform(0.0, 20.0, 10.0))
    t = GeoTransform(origin_x=0.0, origin_y=20.0, pixel_width=10.0, pixel_height=10.0)
    tile_a = make_label_grid(np.full((2, 2), 3), transform=t)
    tile_b = make_label_grid(np.full((2, 2), 5), transform=t)
    assert np.all(merge_label_tiles([tile_a, tile_b], target).samples == 3)
    assert np.all(merge_label_tiles([tile_b, tile_a], target).samples == 5)


def test_merge_nodata_tile_cells_fall_through():
    target = make_dn_grid(np.ones((1, 2)), transform=make_transform(0.0, 10.0, 10.0))
    t = GeoTransform(origin_x=0.0, origin_y=10.0, pixel_width=10.0, pixel_height=10.0)
    front = make_label_grid(np.array([[0, 4]]), transform=t)
    back = make_label_grid(np.array([[7, 7]]), transform=t)
    merged = merge_label_tiles([front, back], target)
    assert merged.samples.tolist() == [[7, 4]]


def test_merge_requires_matching_crs_and_label_kind():
    target = make_dn_grid(np.ones((2, 2)))
    with pytest.raises(ValueError):
        merge_label_tiles([make_label_grid(np.ones((2, 2)), crs="EPSG:4326")], target)
    with pytest.raises(ValueError):
        merge_label_tiles([make_dn_grid(np.ones((2, 2)))], target)
    with pytest.raises(ValueError):
        merge_label_tiles([], target)


def test_mask_labels_by_sar():
    sar = make_dn_grid([[0, 5], [6, 0]])
    labels = make_label_grid([[2, 3], [4, 5]])
    masked = mask_labels_by_sar(labels, sar)
    assert masked.samples.tolist() == [[0, 3], [4, 0]]
    with pytest.raises(ValueError):
        mask_labels_by_sar(sar, sar)

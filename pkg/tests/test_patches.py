import json

import numpy as np
import pytest

from sarpatch.patches import (
    MANIFEST_KEYS,
    PatchRecord,
    class_histogram,
    crop,
    enumerate_patch_windows,
    extract_patch_pair,
    read_manifest,
    window_is_valid,
    write_manifest,
)

from conftest import make_db_grid, make_label_grid, make_transform


def test_enumerate_counts_and_row_major_order():
    windows = enumerate_patch_windows(10, 7, 3)
    assert windows == [
        (0, 0), (3, 0), (6, 0),
        (0, 3), (3, 3), (6, 3),
    ]
    assert enumerate_patch_windows(2, 2, 3) == []
    assert len(enumerate_patch_windows(1024, 1024, 256)) == 16
    with pytest.raises(ValueError):
        enumerate_patch_windows(4, 4, 0)


def oracle_valid(sar, labels, size, allow_gaps):
    out = set()
    for col0, row0 in enumerate_patch_windows(sar.width, sar.height, size):
        sar_block = np.asarray(sar.samples)[row0 : row0 + size, col0 : col0 + size]
        ok = not np.isnan(sar_block).any()
        if ok and not allow_gaps:
            lab_block = np.asarray(labels.samples)[row0 : row0 + size, col0 : col0 + size]
            ok = not (lab_block == int(labels.nodata)).any()
        if ok:
            out.add((col0, row0))
    return out


@pytest.mark.parametrize("allow_gaps", [False, True])
def test_window_validity_matches_oracle(rng, allow_gaps):
    sar = rng.normal(-15, 3, size=(24, 24)).astype(np.float32)
    sar[0:5, 0:9] = np.nan
    sar[20:, 14:] = np.nan
    labels = rng.integers(1, 5, size=(24, 24)).astype(np.uint8)
    labels[10:13, :] = 0
    sar_grid = make_db_grid(sar)
    label_grid = make_label_grid(labels, nodata=0)
    got = {
        w for w in enumerate_patch_windows(24, 24, 6)
        if window_is_valid(sar_grid, label_grid, w[0], w[1], 6, allow_gaps)
    }
    assert got == oracle_valid(sar_grid, label_grid, 6, allow_gaps)


def test_crop_bounds_checked():
    grid = make_db_grid(np.zeros((8, 8), dtype=np.float32))
    assert crop(grid, 2, 4, 4).shape == (4, 4)
    with pytest.raises(ValueError):
        crop(grid, 6, 0, 4)
    with pytest.raises(ValueError):
        crop(grid, -1, 0, 4)


def test_window_validity_bounds_checked():
    sar = make_db_grid(np.zeros((8, 8), dtype=np.float32))
    labels = make_label_grid(np.ones((8, 8)))
    assert window_is_valid(sar, labels, 4, 4, 4)
    for col0, row0 in [(6, 0), (0, 6), (-1, 0), (0, -1)]:
        with pytest.raises(ValueError):
            window_is_valid(sar, labels, col0, row0, 4)


def test_class_histogram_excludes_nodata():
    patch = np.array([[0, 1], [1, 3]], dtype=np.uint8)
    assert class_histogram(patch, 0) == {1: 2, 3: 1}
    assert class_histogram(np.zeros((2, 2), dtype=np.uint8), 0) == {}


def test_extract_patch_pair_world_bounds():
    transform = make_transform(origin_x=500.0, origin_y=9000.0, pixel=20.0)
    sar = make_db_grid(np.zeros((8, 8), dtype=np.float32), transform=transform)
    labels = make_label_grid(np.full((8, 8), 2), transform=transform)
    record, sar_patch, label_patch = extract_patch_pair(
        sar, labels, col0=4, row0=2, size=4, scene_id="s", patch_id="s_p"
    )
    assert sar_patch.shape == (4, 4) and label_patch.shape == (4, 4)
    assert record.min_x == 500.0 + 4 * 20.0
    assert record.max_x == record.min_x + 4 * 20.0
    assert record.max_y == 9000.0 - 2 * 20.0
    assert record.min_y == record.max_y - 4 * 20.0
    assert record.class_histogram == {2: 16}
    assert record.split == "unassigned"


def test_extract_requires_db_imagery_and_coregistration():
    labels = make_label_grid(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        extract_patch_pair(labels, labels, 0, 0, 4, "s", "p")
    sar = make_db_grid(np.zeros((8, 8), dtype=np.float32))
    shifted = make_label_grid(np.zeros((8, 8)), transform=make_transform(origin_x=1.0))
    with pytest.raises(ValueError):
        extract_patch_pair(sar, shifted, 0, 0, 4, "s", "p")


def sample_record(i=0, split="unassigned"):
    return PatchRecord(
        patch_id=f"p{i}", scene_id="s", col0=i * 4, row0=0, size=4,
        min_x=float(i), min_y=0.0, max_x=float(i + 1), max_y=1.0,
        class_histogram={1: 10, 3: 6}, split=split,
    )


def test_manifest_roundtrip_and_key_order(tmp_path):
    records = [sample_record(0), sample_record(1, split="train")]
    path = tmp_path / "manifest.jsonl"
    write_manifest(records, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert tuple(first.keys()) == MANIFEST_KEYS
    assert all(isinstance(k, str) for k in first["class_histogram"])
    assert read_manifest(path) == records


def test_manifest_rejects_extra_and_missing_keys(tmp_path):
    path = tmp_path / "bad.jsonl"
    row = sample_record().to_json_dict()
    row["bogus"] = 1
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(ValueError, match="bogus"):
        read_manifest(path)
    row = sample_record().to_json_dict()
    del row["split"]
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(ValueError, match="split"):
        read_manifest(path)


def test_manifest_no_header_line(tmp_path):
    path = tmp_path / "manifest.jsonl"
    write_manifest([sample_record()], path)
    first = json.loads(path.read_text().splitlines()[0])
    assert "patch_id" in first  # rows only, no preamble object

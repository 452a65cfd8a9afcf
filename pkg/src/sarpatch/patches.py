"""Patch extraction: window enumeration, validity, records, manifests.

A patch is a square, axis-aligned window cut from a calibrated scene and
its label raster at identical pixel offsets. Windows tile the scene
without overlap starting at the top-left corner; whatever does not fill a
complete window at the right and bottom margins is discarded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import RasterGrid, SampleKind, require_coregistered

DEFAULT_PATCH_SIZE = 256

MANIFEST_KEYS = (
    "patch_id",
    "scene_id",
    "col0",
    "row0",
    "size",
    "min_x",
    "min_y",
    "max_x",
    "max_y",
    "class_histogram",
    "split",
)


@dataclass(frozen=True)
class PatchRecord:
    """One manifest row: where a patch sits and what classes it holds.

    ``class_histogram`` counts valid label pixels per class id; nodata
    pixels are never counted. ``split`` is "unassigned" until split
    assignment runs.
    """

    patch_id: str
    scene_id: str
    col0: int
    row0: int
    size: int
    min_x: float
    min_y: float
    max_x: float
    max_y: float
    class_histogram: dict[int, int] = field(default_factory=dict)
    split: str = "unassigned"

    def to_json_dict(self) -> dict:
        out = {}
        for key in MANIFEST_KEYS:
            value = getattr(self, key)
            if key == "class_histogram":
                value = {str(c): int(n) for c, n in sorted(value.items())}
            out[key] = value
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "PatchRecord":
        extra = set(data) - set(MANIFEST_KEYS)
        missing = set(MANIFEST_KEYS) - set(data)
        if extra or missing:
            raise ValueError(
                f"manifest row keys mismatch: extra={sorted(extra)} missing={sorted(missing)}"
            )
        histogram = {int(c): int(n) for c, n in data["class_histogram"].items()}
        return cls(
            patch_id=str(data["patch_id"]),
            scene_id=str(data["scene_id"]),
            col0=int(data["col0"]),
            row0=int(data["row0"]),
            size=int(data["size"]),
            min_x=float(data["min_x"]),
            min_y=float(data["min_y"]),
            max_x=float(data["max_x"]),
            max_y=float(data["max_y"]),
            class_histogram=histogram,
            split=str(data["split"]),
        )


def enumerate_patch_windows(width: int, height: int,
                            size: int = DEFAULT_PATCH_SIZE) -> list[tuple[int, int]]:
    """Top-left (col0, row0) offsets of all complete windows, row-major."""
    if size <= 0:
        raise ValueError("patch size must be positive")
    return [
        (c * size, r * size)
        for r in range(height // size)
        for c in range(width // size)
    ]


def window_is_valid(sar: RasterGrid, labels: RasterGrid, col0: int, row0: int,
                    size: int, allow_label_gaps: bool = False) -> bool:
    """Whether a window is usable for training.

    Any nodata in the imagery disqualifies the window outright. Label gaps
    disqualify it too unless ``allow_label_gaps`` (pretraining corpora keep
    unannotated-but-imaged windows).
    """
    if col0 < 0 or row0 < 0 or col0 + size > sar.width or row0 + size > sar.height:
        raise ValueError(
            f"window ({col0},{row0})+{size} exceeds {sar.width}x{sar.height} grid"
        )
    sar_ok = bool(sar.valid_mask()[row0 : row0 + size, col0 : col0 + size].all())
    if not sar_ok:
        return False
    if allow_label_gaps:
        return True
    return bool(labels.valid_mask()[row0 : row0 + size, col0 : col0 + size].all())


def crop(grid: RasterGrid, col0: int, row0: int, size: int) -> np.ndarray:
    """Window samples as a contiguous copy; bounds must lie inside the grid."""
    if col0 < 0 or row0 < 0 or col0 + size > grid.width or row0 + size > grid.height:
        raise ValueError(
            f"window ({col0},{row0})+{size} exceeds {grid.width}x{grid.height} grid"
        )
    return np.ascontiguousarray(grid.samples[row0 : row0 + size, col0 : col0 + size])


def class_histogram(label_patch: np.ndarray, nodata: int) -> dict[int, int]:
    values, counts = np.unique(label_patch, return_counts=True)
    return {
        int(v): int(n) for v, n in zip(values, counts) if int(v) != nodata
    }


def extract_patch_pair(sar: RasterGrid, labels: RasterGrid, col0: int, row0: int,
                       size: int, scene_id: str,
                       patch_id: str) -> tuple[PatchRecord, np.ndarray, np.ndarray]:
    """Cut one aligned (imagery, labels) window and describe it.

    Returns the manifest record plus the two sample arrays. World bounds
    in the record span the full window footprint (pixel edges, not
    centers): x grows with columns, y shrinks with rows.
    """
    if sar.kind != SampleKind.SAR_DB:
        raise ValueError("patch imagery must be calibrated dB")
    require_coregistered(sar, labels)
    sar_patch = crop(sar, col0, row0, size)
    label_patch = crop(labels, col0, row0, size)
    t = sar.transform
    min_x = t.origin_x + col0 * t.pixel_width
    max_y = t.origin_y - row0 * t.pixel_height
    record = PatchRecord(
        patch_id=patch_id,
        scene_id=scene_id,
        col0=col0,
        row0=row0,
        size=size,
        min_x=min_x,
        min_y=max_y - size * t.pixel_height,
        max_x=min_x + size * t.pixel_width,
        max_y=max_y,
        class_histogram=class_histogram(label_patch, int(labels.nodata)),
    )
    return record, sar_patch, label_patch


def write_manifest(records: list[PatchRecord], path) -> None:
    """One JSON object per line, keys in fixed order, no header."""
    with Path(path).open("w", encoding="ascii") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_dict(), separators=(", ", ": ")))
            fh.write("\n")


def read_manifest(path) -> list[PatchRecord]:
    records = []
    with Path(path).open("r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(PatchRecord.from_json_dict(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from exc
    return records

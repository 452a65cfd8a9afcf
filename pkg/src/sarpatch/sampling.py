"""Category-balanced location sampling and patch selection.

Rare land-cover classes get sampled more densely than their area share:
class probabilities over the whole corpus invert into weights, locations
are drawn class-first, and patches are kept if any drawn location falls
inside them. All randomness flows through the in-package generator so a
(seed, raster_id) pair yields the same points on every platform.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import RasterGrid, SampleKind
from .patches import PatchRecord
from .rng import Xoshiro256StarStar, derive_seed

# published corpus split sizes; ratios below reproduce them under
# largest-remainder apportionment of the same corpus
SPLIT_COUNTS = {"train": 72238, "val": 20005, "test": 18894}
_SPLIT_TOTAL = sum(SPLIT_COUNTS.values())
DEFAULT_SPLIT_RATIOS = {name: n / _SPLIT_TOTAL for name, n in SPLIT_COUNTS.items()}

MAX_ATTEMPT_FACTOR = 100


@dataclass
class CategoryStats:
    """Valid-pixel counts per class id accumulated over label rasters."""

    counts: dict[int, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def update(self, labels: RasterGrid) -> None:
        if labels.kind != SampleKind.LABEL:
            raise ValueError("stats accumulate over label grids")
        samples = np.asarray(labels.samples)
        values, counts = np.unique(samples[labels.valid_mask()], return_counts=True)
        for v, n in zip(values, counts):
            key = int(v)
            self.counts[key] = self.counts.get(key, 0) + int(n)


def accumulate_stats(grids: Iterable[RasterGrid]) -> CategoryStats:
    stats = CategoryStats()
    for grid in grids:
        stats.update(grid)
    return stats


@dataclass(frozen=True)
class CategoryWeights:
    """Inverse-frequency sampling weights.

    For each class: probability = count/total, raw weight = 1/probability,
    normalized = raw/sum(raw). Classes with zero count, and classes the
    caller excludes, carry zero raw weight and so zero normalized weight.
    All sums run in ascending class-id order, which pins the floating-point
    result for a given histogram.
    """

    classes: tuple[int, ...]
    probability: dict[int, float]
    raw: dict[int, float]
    normalized: dict[int, float]


def category_weights(stats: CategoryStats,
                     zero_weight_classes: frozenset[int] = frozenset()) -> CategoryWeights:
    classes = tuple(sorted(stats.counts))
    if not classes:
        raise ValueError("no classes counted")
    total = stats.total
    if total <= 0:
        raise ValueError("histogram holds no pixels")
    probability: dict[int, float] = {}
    raw: dict[int, float] = {}
    for c in classes:
        count = stats.counts[c]
        probability[c] = count / total
        if count > 0 and c not in zero_weight_classes:
            raw[c] = 1.0 / probability[c]
        else:
            raw[c] = 0.0
    denom = math.fsum(raw[c] for c in classes)
    if denom <= 0.0:
        raise ValueError("every class has zero weight; nothing is sampleable")
    normalized = {c: raw[c] / denom for c in classes}
    return CategoryWeights(
        classes=classes, probability=probability, raw=raw, normalized=normalized
    )


def largest_remainder(shares: Sequence[float], n: int) -> list[int]:
    """Integer apportionment of n by share, floor first then by remainder.

    Every returned count differs from its exact quota by strictly less
    than one. Remainder ties break toward the lower index.
    """
    if n < 0:
        raise ValueError("cannot apportion a negative total")
    if any(s < 0 for s in shares):
        raise ValueError("shares must be non-negative")
    total = math.fsum(shares)
    if total <= 0:
        raise ValueError("shares sum to zero")
    quotas = [s / total * n for s in shares]
    counts = [math.floor(q) for q in quotas]
    remainder = n - sum(counts)
    order = sorted(range(len(shares)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def sampleable_pixel_count(labels: RasterGrid, weights: CategoryWeights) -> int:
    """Valid pixels whose class has positive normalized weight."""
    samples = np.asarray(labels.samples)
    mask = labels.valid_mask()
    count = 0
    for c, w in weights.normalized.items():
        if w > 0.0:
            count += int(np.count_nonzero(mask & (samples == c)))
    return count


def allocate_per_image(sampleable: dict[str, int], n_total: int) -> dict[str, int]:
    """Split a point budget across rasters in proportion to sampleable area.

    Rasters with nothing sampleable get zero. Iteration order is sorted
    raster id so the apportionment is reproducible.
    """
    ids = sorted(sampleable)
    if not ids:
        raise ValueError("no rasters to allocate over")
    shares = [float(sampleable[i]) for i in ids]
    if math.fsum(shares) <= 0:
        return {i: 0 for i in ids}
    counts = largest_remainder(shares, n_total)
    return dict(zip(ids, counts))


@dataclass(frozen=True)
class SamplePoint:
    """One drawn location: pixel address plus its world-space center."""

    raster_id: str
    col: int
    row: int
    class_id: int
    x: float
    y: float

    def to_json_dict(self) -> dict:
        return {
            "raster_id": self.raster_id,
            "col": self.col,
            "row": self.row,
            "class_id": self.class_id,
            "x": self.x,
            "y": self.y,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SamplePoint":
        return cls(
            raster_id=str(data["raster_id"]),
            col=int(data["col"]),
            row=int(data["row"]),
            class_id=int(data["class_id"]),
            x=float(data["x"]),
            y=float(data["y"]),
        )


@dataclass(frozen=True)
class SamplePlan:
    """A seed and every point drawn under it."""

    seed: int
    points: tuple[SamplePoint, ...]


def sample_locations(labels: RasterGrid, weights: CategoryWeights, n: int,
                     seed: int, raster_id: str) -> list[SamplePoint]:
    """Draw n distinct pixel locations, rare classes first-class.

    Stage one picks a class by normalized weight, renormalized over the
    classes actually present in this raster; stage two picks uniformly
    among that class's pixels. Re-draws on duplicate pixels, capped at
    100*n attempts as a stall guard. Asking for more points than the
    raster has distinct sampleable pixels is an error, not a short batch.
    The generator is seeded from (seed, raster_id); each attempt consumes
    one uniform for the class then one bounded draw for the pixel.
    """
    if labels.kind != SampleKind.LABEL:
        raise ValueError("sampling runs over label grids")
    if n <= 0:
        return []
    samples = np.asarray(labels.samples)
    mask = labels.valid_mask()
    flat = samples.reshape(-1)
    flat_mask = mask.reshape(-1)
    pools: list[np.ndarray] = []
    eligible: list[int] = []
    for c in weights.classes:
        if weights.normalized[c] <= 0.0:
            continue
        pool = np.flatnonzero(flat_mask & (flat == c))
        if pool.size:
            eligible.append(c)
            pools.append(pool)
    distinct = sum(int(pool.size) for pool in pools)
    if distinct < n:
        raise ValueError(
            f"{raster_id}: {n} points requested but only {distinct} distinct "
            "sampleable pixels exist"
        )
    local = [weights.normalized[c] for c in eligible]
    denom = math.fsum(local)
    cumulative = []
    running = 0.0
    for w in local:
        running += w / denom
        cumulative.append(running)
    cumulative[-1] = 1.0
    rng = Xoshiro256StarStar(derive_seed(seed, raster_id))
    width = labels.width
    seen: set[int] = set()
    points: list[SamplePoint] = []
    attempts = 0
    limit = MAX_ATTEMPT_FACTOR * n
    while len(points) < n and attempts < limit:
        attempts += 1
        k = bisect.bisect_right(cumulative, rng.random())
        pool = pools[k]
        flat_idx = int(pool[rng.randbelow(pool.size)])
        if flat_idx in seen:
            continue
        seen.add(flat_idx)
        row, col = divmod(flat_idx, width)
        x, y = labels.transform.pixel_to_world(col + 0.5, row + 0.5)
        points.append(
            SamplePoint(
                raster_id=raster_id, col=col, row=row,
                class_id=eligible[k], x=x, y=y,
            )
        )
    return points


def match_points_to_patches(points: Sequence[SamplePoint],
                            records: Sequence[PatchRecord],
                            chunk: int = 1024) -> tuple[set[str], int]:
    """Resolve each point to the first manifest patch whose footprint holds it.

    Containment is half-open so abutting patches never both claim a point:
    min_x <= x < max_x and min_y < y <= max_y (y grows upward, so the top
    edge belongs to the patch below it on the page). Returns the set of
    selected patch ids and how many points landed in no patch.
    """
    if not records:
        return set(), len(points)
    min_x = np.array([r.min_x for r in records])
    max_x = np.array([r.max_x for r in records])
    min_y = np.array([r.min_y for r in records])
    max_y = np.array([r.max_y for r in records])
    selected: set[str] = set()
    unmatched = 0
    for start in range(0, len(points), chunk):
        block = points[start : start + chunk]
        px = np.array([p.x for p in block])[:, None]
        py = np.array([p.y for p in block])[:, None]
        inside = (min_x[None, :] <= px) & (px < max_x[None, :]) \
            & (min_y[None, :] < py) & (py <= max_y[None, :])
        any_hit = inside.any(axis=1)
        unmatched += int(np.count_nonzero(~any_hit))
        first = inside.argmax(axis=1)
        for hit, idx in zip(any_hit, first):
            if hit:
                selected.add(records[int(idx)].patch_id)
    return selected, unmatched


def filter_full_forest(records: Sequence[PatchRecord],
                       forest_classes: frozenset[int]) -> list[PatchRecord]:
    """Drop patches whose every labeled pixel is a forest class.

    Patches with no labeled pixels at all are kept; there is no evidence
    they are forest.
    """
    kept = []
    for record in records:
        support = {c for c, n in record.class_histogram.items() if n > 0}
        if support and support <= forest_classes:
            continue
        kept.append(record)
    return kept


def assign_splits(records: Sequence[PatchRecord],
                  ratios: dict[str, float] | None = None,
                  seed: int = 0) -> list[PatchRecord]:
    """Assign every record a split label by seeded shuffle.

    Ratios must sum to 1 (within 1e-9); callers holding arbitrary
    positive shares normalize first. Split sizes come from
    largest-remainder apportionment, so each differs from its exact share
    by less than one patch. Records come back in their original order
    with only ``split`` rewritten.
    """
    if ratios is None:
        ratios = DEFAULT_SPLIT_RATIOS
    names = list(ratios)
    if not names:
        raise ValueError("no splits given")
    total = math.fsum(ratios.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {total!r}")
    counts = largest_remainder([ratios[name] for name in names], len(records))
    order = list(range(len(records)))
    rng = Xoshiro256StarStar(derive_seed(seed, "split-assign"))
    rng.shuffle(order)
    assignment: dict[int, str] = {}
    cursor = 0
    for name, count in zip(names, counts):
        for idx in order[cursor : cursor + count]:
            assignment[idx] = name
        cursor += count
    return [replace(record, split=assignment[i]) for i, record in enumerate(records)]


def save_plan(plan: SamplePlan, path, config_hash: str = "") -> None:
    """Seed header line (plus config hash when known), then one point per line."""
    header: dict = {"seed": plan.seed}
    if config_hash:
        header["config_hash"] = config_hash
    with Path(path).open("w", encoding="ascii") as fh:
        fh.write(json.dumps(header) + "\n")
        for point in plan.points:
            fh.write(json.dumps(point.to_json_dict(), separators=(", ", ": ")) + "\n")


def load_plan(path) -> SamplePlan:
    with Path(path).open("r", encoding="ascii") as fh:
        header = json.loads(fh.readline())
        points = tuple(
            SamplePoint.from_json_dict(json.loads(line))
            for line in fh
            if line.strip()
        )
    return SamplePlan(seed=int(header["seed"]), points=points)

"""Pipeline stages behind the CLI: pure functions of (inputs, config, seed).

Each stage reads files named by the config, writes its artifacts, and
returns a JSON-ready report. Per-scene work fans out over a process pool
when jobs > 1; results are aggregated in input order, so the artifacts are
byte-identical whatever the worker count. Per-item failures are caught and
reported rather than aborting the whole stage.
"""

from __future__ import annotations

import functools
import json
import math
import multiprocessing
from pathlib import Path

import numpy as np

from .calibration import CalibrationTable, calibrate_db
from .config import ConfigError, PipelineConfig, config_hash, resolve_path
from .geotiff import read_geotiff, write_geotiff
from .gradcheck import central_difference_grad, max_relative_error
from .grid import GeoTransform, RasterGrid, SampleKind
from .legend import LegendRemap, apply_legend, load_legend
from .masking import MaskSpec, expand_token_mask, generate_mask
from .metrics import confusion_counts, merge_confusions, metrics_from_confusion
from .patches import (
    PatchRecord,
    enumerate_patch_windows,
    extract_patch_pair,
    read_manifest,
    window_is_valid,
    write_manifest,
)
from .patchio import read_patch_blob
from .recon_loss import WeightMapConfig, sar_weight_map, weighted_l1_loss
from .rng import derive_seed
from .sampling import (
    CategoryStats,
    CategoryWeights,
    SamplePlan,
    SamplePoint,
    allocate_per_image,
    assign_splits,
    category_weights,
    filter_full_forest,
    match_points_to_patches,
    sample_locations,
    save_plan,
)
from .scene import downsample_half, mask_labels_by_sar, merge_label_tiles
from .schedule import LrSchedule, ScheduleConfig, lr_schedule
from .seg_loss import LossConfig, combined_loss, dice_loss, focal_loss, one_hot

GRAD_CHECK_THRESHOLD = 1e-5


class PipelineError(RuntimeError):
    """A stage could not run at all (as opposed to per-item failures)."""


def provenance(cfg: PipelineConfig, command: str, seed: int) -> str:
    return json.dumps(
        {"tool": "sarpatch", "command": command, "config_hash": config_hash(cfg),
         "seed": seed},
        separators=(",", ":"),
    )


def _base_report(cfg: PipelineConfig, command: str, seed: int) -> dict:
    return {"command": command, "config_hash": config_hash(cfg), "seed": seed}


def write_report(report: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2) + "\n", encoding="ascii")


def _guarded(worker, task):
    try:
        return True, worker(task)
    except Exception as exc:
        return False, f"{task[0]}: {type(exc).__name__}: {exc}"


def _run_tasks(worker, tasks, jobs: int) -> list:
    """Apply worker to tasks, in order, optionally across processes.

    Each task is a tuple whose first element names the item for error
    reports. Returns (ok, payload) pairs in task order.
    """
    guarded = functools.partial(_guarded, worker)
    if jobs <= 1 or len(tasks) <= 1:
        return [guarded(task) for task in tasks]
    with multiprocessing.Pool(processes=min(jobs, len(tasks))) as pool:
        return pool.map(guarded, tasks)


def _list_scenes(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise PipelineError(f"input directory missing: {directory}")
    scenes = sorted(directory.glob("*.tif"))
    if not scenes:
        raise PipelineError(f"no .tif inputs in {directory}")
    return scenes


def _split_results(results, items) -> tuple[list, list[str]]:
    payloads, failures = [], []
    for (ok, payload), _item in zip(results, items):
        if ok:
            payloads.append(payload)
        else:
            failures.append(payload)
    return payloads, failures


# ---------------------------------------------------------------- downsample

def _downsample_worker(task):
    name, in_path, out_path, power_domain, desc = task
    grid = read_geotiff(in_path)
    half = downsample_half(grid, power_domain=power_domain)
    write_geotiff(half, out_path, description=desc)
    valid = half.valid_mask()
    return {
        "scene": name,
        "width": half.width,
        "height": half.height,
        "nodata_fraction": float(1.0 - valid.mean()),
    }


def run_downsample(cfg: PipelineConfig, seed: int, jobs: int) -> tuple[dict, bool]:
    scenes = _list_scenes(resolve_path(cfg, "scenes_dir"))
    out_dir = resolve_path(cfg, "downsampled_dir")
    out_dir.mkdir(parents=True, exist_ok=True)
    desc = provenance(cfg, "downsample", seed)
    tasks = [
        (path.stem, str(path), str(out_dir / path.name), cfg.power_domain, desc)
        for path in scenes
    ]
    results = _run_tasks(_downsample_worker, tasks, jobs)
    payloads, failures = _split_results(results, tasks)
    report = _base_report(cfg, "downsample", seed)
    report["scenes"] = payloads
    report["failures"] = failures
    write_report(report, resolve_path(cfg, "reports_dir") / "downsample.json")
    return report, not failures


# -------------------------------------------------------------------- labels

def _labels_worker(task):
    name, scene_path, tile_paths, out_path, desc = task
    sar = read_geotiff(scene_path)
    tiles = [read_geotiff(p) for p in tile_paths]
    mosaic = merge_label_tiles(tiles, sar)
    masked = mask_labels_by_sar(mosaic, sar)
    write_geotiff(masked, out_path, description=desc)
    labeled = float(masked.valid_mask().mean())
    return {
        "scene": name,
        "labeled_fraction": labeled,
        "all_nodata": labeled == 0.0,
    }


def run_labels(cfg: PipelineConfig, seed: int, jobs: int) -> tuple[dict, bool]:
    scenes = _list_scenes(resolve_path(cfg, "downsampled_dir"))
    tiles = _list_scenes(resolve_path(cfg, "label_tiles_dir"))
    out_dir = resolve_path(cfg, "aligned_labels_dir")
    out_dir.mkdir(parents=True, exist_ok=True)
    desc = provenance(cfg, "labels", seed)
    tile_paths = [str(p) for p in tiles]
    tasks = [
        (path.stem, str(path), tile_paths, str(out_dir / path.name), desc)
        for path in scenes
    ]
    results = _run_tasks(_labels_worker, tasks, jobs)
    payloads, failures = _split_results(results, tasks)
    report = _base_report(cfg, "labels", seed)
    report["scenes"] = payloads
    report["warnings"] = [
        f"{entry['scene']}: no label tile covers this scene"
        for entry in payloads
        if entry["all_nodata"]
    ]
    report["failures"] = failures
    write_report(report, resolve_path(cfg, "reports_dir") / "labels.json")
    return report, not failures


# ------------------------------------------------------------------ patchify

def load_calibration(cfg: PipelineConfig) -> CalibrationTable:
    if cfg.calibration_mode == "formula":
        return CalibrationTable(mode="formula", cf=cfg.calibration_factor)
    rows = []
    table_path = Path(cfg.calibration_table)
    if not table_path.is_absolute():
        table_path = Path(cfg.workspace) / table_path
    for line in table_path.read_text(encoding="ascii").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        dn, db = line.split()
        rows.append((float(dn), float(db)))
    return CalibrationTable(mode="lookup", table=tuple(rows))


def _load_legend_for(cfg: PipelineConfig) -> LegendRemap:
    path = resolve_path(cfg, "legend_file")
    if path.exists():
        return load_legend(path)
    return LegendRemap()


def _patchify_worker(task):
    (name, scene_path, label_path, out_dir, size, allow_gaps, cal_mode, cal_cf,
     cal_rows, mapping, forest, zero, strict, desc) = task
    cal = CalibrationTable(mode=cal_mode, cf=cal_cf, table=cal_rows)
    remap = LegendRemap(
        mapping=mapping, forest_classes=forest, zero_weight_classes=zero,
        strict=strict,
    )
    dn = read_geotiff(scene_path)
    # remap before windowing: validity and histograms describe the label
    # patches that actually ship, and unknown ids already read as nodata
    labels = apply_legend(read_geotiff(label_path), remap)
    db = calibrate_db(dn, cal)
    out_dir = Path(out_dir)
    records = []
    windows = enumerate_patch_windows(db.width, db.height, size)
    db_min, db_max, db_sum, db_count = np.inf, -np.inf, 0.0, 0
    for col0, row0 in windows:
        if not window_is_valid(db, labels, col0, row0, size, allow_gaps):
            continue
        patch_id = f"{name}_{col0}_{row0}"
        record, sar_patch, label_patch = extract_patch_pair(
            db, labels, col0, row0, size, name, patch_id
        )
        records.append(record)
        sar_grid = RasterGrid(
            samples=sar_patch, kind=SampleKind.SAR_DB, nodata=db.nodata,
            transform=_window_transform(db, col0, row0), crs_tag=db.crs_tag,
        )
        label_grid = RasterGrid(
            samples=label_patch, kind=SampleKind.LABEL, nodata=labels.nodata,
            transform=_window_transform(db, col0, row0), crs_tag=labels.crs_tag,
        )
        write_geotiff(sar_grid, out_dir / f"{patch_id}_db.tif", description=desc)
        write_geotiff(label_grid, out_dir / f"{patch_id}_lab.tif", description=desc)
        finite = sar_patch[np.isfinite(sar_patch)]
        if finite.size:
            db_min = min(db_min, float(finite.min()))
            db_max = max(db_max, float(finite.max()))
            db_sum += float(finite.sum())
            db_count += int(finite.size)
    stats = {
        "scene": name,
        "windows": len(windows),
        "patches": len(records),
        "db_min": db_min if db_count else None,
        "db_max": db_max if db_count else None,
        "db_sum": db_sum,
        "db_count": db_count,
    }
    return records, stats


def _window_transform(grid: RasterGrid, col0: int, row0: int) -> GeoTransform:
    t = grid.transform
    return GeoTransform(
        origin_x=t.origin_x + col0 * t.pixel_width,
        origin_y=t.origin_y - row0 * t.pixel_height,
        pixel_width=t.pixel_width,
        pixel_height=t.pixel_height,
    )


def run_patchify(cfg: PipelineConfig, seed: int, jobs: int) -> tuple[dict, bool]:
    scenes = _list_scenes(resolve_path(cfg, "downsampled_dir"))
    labels_dir = resolve_path(cfg, "aligned_labels_dir")
    out_dir = resolve_path(cfg, "patches_dir")
    out_dir.mkdir(parents=True, exist_ok=True)
    cal = load_calibration(cfg)
    legend = _load_legend_for(cfg)
    desc = provenance(cfg, "patchify", seed)
    tasks = []
    for path in scenes:
        label_path = labels_dir / path.name
        if not label_path.exists():
            raise PipelineError(f"no aligned labels for scene {path.stem}")
        tasks.append(
            (path.stem, str(path), str(label_path), str(out_dir), cfg.patch_size,
             cfg.allow_label_gaps, cal.mode, cal.cf, cal.table,
             legend.mapping, legend.forest_classes, legend.zero_weight_classes,
             legend.strict, desc)
        )
    results = _run_tasks(_patchify_worker, tasks, jobs)
    payloads, failures = _split_results(results, tasks)
    records: list[PatchRecord] = []
    scene_stats = []
    total_sum, total_count = 0.0, 0
    total_min, total_max = np.inf, -np.inf
    for scene_records, stats in payloads:
        records.extend(scene_records)
        total_sum += stats.pop("db_sum")
        count = stats.pop("db_count")
        total_count += count
        if stats["db_min"] is not None:
            total_min = min(total_min, stats["db_min"])
            total_max = max(total_max, stats["db_max"])
        scene_stats.append(stats)
    write_manifest(records, out_dir / "manifest.jsonl")
    report = _base_report(cfg, "patchify", seed)
    report["patch_size"] = cfg.patch_size
    report["calibration"] = {"mode": cal.mode, "cf": cal.cf}
    report["scenes"] = scene_stats
    report["patches_total"] = len(records)
    report["db_stats"] = {
        "min": total_min if total_count else None,
        "max": total_max if total_count else None,
        "mean": total_sum / total_count if total_count else None,
    }
    report["failures"] = failures
    write_report(report, resolve_path(cfg, "reports_dir") / "patchify.json")
    return report, not failures


# -------------------------------------------------------------------- sample

def _label_stats_worker(task):
    name, label_path, mapping, forest, zero, strict = task
    remap = LegendRemap(
        mapping=mapping, forest_classes=forest, zero_weight_classes=zero,
        strict=strict,
    )
    labels = apply_legend(read_geotiff(label_path), remap)
    samples = np.asarray(labels.samples)
    values, counts = np.unique(samples[labels.valid_mask()], return_counts=True)
    return {int(v): int(n) for v, n in zip(values, counts)}


def _sample_worker(task):
    name, label_path, mapping, forest, zero, strict, normalized, n, seed = task
    remap = LegendRemap(
        mapping=mapping, forest_classes=forest, zero_weight_classes=zero,
        strict=strict,
    )
    labels = apply_legend(read_geotiff(label_path), remap)
    classes = tuple(sorted(normalized))
    weights = CategoryWeights(
        classes=classes,
        probability={c: 0.0 for c in classes},
        raw={c: 0.0 for c in classes},
        normalized=dict(normalized),
    )
    return sample_locations(labels, weights, n, seed, name)


def run_sample(cfg: PipelineConfig, seed: int, jobs: int) -> tuple[dict, bool]:
    labels_dir = resolve_path(cfg, "aligned_labels_dir")
    label_paths = _list_scenes(labels_dir)
    patches_dir = resolve_path(cfg, "patches_dir")
    manifest_path = patches_dir / "manifest.jsonl"
    if not manifest_path.exists():
        raise PipelineError(f"manifest missing: {manifest_path} (run patchify first)")
    records = read_manifest(manifest_path)
    legend = _load_legend_for(cfg)
    remap_args = (
        legend.mapping, legend.forest_classes, legend.zero_weight_classes,
        legend.strict,
    )

    stats_tasks = [
        (path.stem, str(path)) + remap_args for path in label_paths
    ]
    stats_results = _run_tasks(_label_stats_worker, stats_tasks, jobs)
    per_scene_counts, failures = _split_results(stats_results, stats_tasks)
    if failures:
        report = _base_report(cfg, "sample", seed)
        report["failures"] = failures
        write_report(report, resolve_path(cfg, "reports_dir") / "sample.json")
        return report, False

    merged = {}
    for counts in per_scene_counts:
        for c, n in counts.items():
            merged[c] = merged.get(c, 0) + n
    stats = CategoryStats(counts=merged)
    weights = category_weights(stats, legend.zero_weight_classes)
    sampleable = {}
    for path, counts in zip(label_paths, per_scene_counts):
        sampleable[path.stem] = sum(
            n for c, n in counts.items() if weights.normalized.get(c, 0.0) > 0.0
        )
    allocation = allocate_per_image(sampleable, cfg.sample_points)

    sample_tasks = [
        (path.stem, str(path)) + remap_args
        + (weights.normalized, allocation[path.stem], seed)
        for path in label_paths
    ]
    sample_results = _run_tasks(_sample_worker, sample_tasks, jobs)
    per_scene_points, failures = _split_results(sample_results, sample_tasks)
    if failures:
        report = _base_report(cfg, "sample", seed)
        report["failures"] = failures
        write_report(report, resolve_path(cfg, "reports_dir") / "sample.json")
        return report, False
    points: list[SamplePoint] = []
    for scene_points in per_scene_points:
        points.extend(scene_points)

    plan = SamplePlan(seed=seed, points=tuple(points))
    save_plan(plan, patches_dir / "plan.jsonl", config_hash=config_hash(cfg))

    selected_ids, unmatched = match_points_to_patches(points, records)
    selected = [r for r in records if r.patch_id in selected_ids]
    if cfg.filter_forest and legend.forest_classes:
        # manifest histograms are post-remap, same namespace as forest ids
        kept = filter_full_forest(selected, legend.forest_classes)
    else:
        kept = list(selected)
    shares = {
        "train": cfg.split_train, "val": cfg.split_val, "test": cfg.split_test,
    }
    share_total = math.fsum(shares.values())
    ratios = {name: value / share_total for name, value in shares.items()}
    final = assign_splits(kept, ratios, seed)
    write_manifest(final, patches_dir / "manifest_sampled.jsonl")

    split_counts = {name: 0 for name in ratios}
    for record in final:
        split_counts[record.split] += 1
    class_draws: dict[str, int] = {}
    for point in points:
        key = str(point.class_id)
        class_draws[key] = class_draws.get(key, 0) + 1

    report = _base_report(cfg, "sample", seed)
    report["points_requested"] = cfg.sample_points
    report["points_drawn"] = len(points)
    report["points_unmatched"] = unmatched
    report["class_draws"] = dict(sorted(class_draws.items(), key=lambda kv: int(kv[0])))
    report["weights_normalized"] = {
        str(c): weights.normalized[c] for c in weights.classes
    }
    report["patches_selected"] = len(selected)
    report["patches_after_forest_filter"] = len(kept)
    report["split_counts"] = split_counts
    report["failures"] = []
    write_report(report, resolve_path(cfg, "reports_dir") / "sample.json")
    return report, True


# ---------------------------------------------------------------- loss-check

def _schedule_summary(schedule: LrSchedule) -> dict:
    cfg = schedule.cfg
    return {
        "base_lr": cfg.base_lr,
        "min_lr": cfg.min_lr,
        "epochs": cfg.epochs,
        "warmup_epochs": cfg.warmup_epochs,
        "lr_step0": schedule(0),
        "lr_warmup_end": schedule(min(cfg.warmup_steps, cfg.total_steps - 1)),
        "lr_final": schedule(cfg.total_steps - 1),
    }


def _probability_rows(rng: np.random.Generator, pixels: int, classes: int) -> np.ndarray:
    """Random rows summing to 1 with entries bounded away from 0 and 1.

    The bound keeps finite-difference probes clear of the min/max kinks
    (where pred equals a one-hot ground truth entry) and the focal clamp.
    """
    raw = rng.dirichlet(np.ones(classes), size=pixels)
    floor = 0.05
    return (raw + floor) / (1.0 + classes * floor)


def _recon_instance(rng: np.random.Generator, side: int = 8, token: int = 4):
    target = rng.normal(loc=-8.0, scale=3.0, size=(side, side))
    signs = np.where(rng.random((side, side)) < 0.5, -1.0, 1.0)
    pred = target + signs * rng.uniform(0.01, 1.0, size=(side, side))
    spec = MaskSpec(
        image_size=side, token_size=token, mask_ratio=0.5,
        seed=int(rng.integers(0, 2 ** 62)),
    )
    mask = expand_token_mask(generate_mask(spec), token)
    return pred, target, mask


def gradient_check_report(cfg: PipelineConfig, seed: int, instances: int = 5) -> dict:
    """Finite-difference residuals for every loss kernel.

    Instances are deliberately tiny: central differences cost two full
    evaluations per coordinate, and correctness does not depend on size.
    """
    loss_cfg = LossConfig(
        dice_weight=cfg.dice_weight, focal_weight=cfg.focal_weight,
        gamma=cfg.gamma, alpha=cfg.alpha, epsilon=cfg.epsilon,
        dice_denominator=cfg.dice_denominator,
    )
    wm_cfg = WeightMapConfig(
        decay=cfg.intensity_decay, mean=cfg.intensity_mean,
        std=cfg.intensity_std, normalize=cfg.normalize_weights,
    )
    rng = np.random.default_rng(derive_seed(seed, "grad-check"))
    errors = {
        "weighted_l1": 0.0,
        "dice_conventional_sums": 0.0,
        "dice_max_union": 0.0,
        "focal": 0.0,
        "combined": 0.0,
    }
    linearity = 0.0
    pixels, classes = 24, 4
    for _ in range(instances):
        pred, target, mask = _recon_instance(rng)
        weights = sar_weight_map(target, wm_cfg, mask)
        _, grad = weighted_l1_loss(pred, target, weights, mask)
        numeric = central_difference_grad(
            lambda p: weighted_l1_loss(p, target, weights, mask)[0], pred
        )
        errors["weighted_l1"] = max(
            errors["weighted_l1"], max_relative_error(grad, numeric)
        )

        probs = _probability_rows(rng, pixels, classes)
        indices = rng.integers(0, classes, size=pixels)
        indices[rng.random(pixels) < 0.1] = -1
        if (indices >= 0).sum() == 0:
            indices[0] = 0
        hot = one_hot(indices, classes)
        for mode in ("conventional_sums", "max_union"):
            mode_cfg = LossConfig(
                dice_weight=loss_cfg.dice_weight, focal_weight=loss_cfg.focal_weight,
                gamma=loss_cfg.gamma, alpha=loss_cfg.alpha, epsilon=loss_cfg.epsilon,
                dice_denominator=mode,
            )
            _, grad = dice_loss(probs, hot, mode_cfg)
            numeric = central_difference_grad(
                lambda p: dice_loss(p, hot, mode_cfg)[0], probs
            )
            errors[f"dice_{mode}"] = max(
                errors[f"dice_{mode}"], max_relative_error(grad, numeric)
            )
        _, grad = focal_loss(probs, indices, loss_cfg)
        numeric = central_difference_grad(
            lambda p: focal_loss(p, indices, loss_cfg)[0], probs
        )
        errors["focal"] = max(errors["focal"], max_relative_error(grad, numeric))

        _, grad = combined_loss(probs, indices, loss_cfg)
        numeric = central_difference_grad(
            lambda p: combined_loss(p, indices, loss_cfg)[0], probs
        )
        errors["combined"] = max(errors["combined"], max_relative_error(grad, numeric))

        d_val, d_grad = dice_loss(probs, hot, loss_cfg)
        f_val, f_grad = focal_loss(probs, indices, loss_cfg)
        c_val, c_grad = combined_loss(probs, indices, loss_cfg)
        expected = loss_cfg.dice_weight * d_grad + loss_cfg.focal_weight * f_grad
        linearity = max(
            linearity,
            float(np.abs(c_grad - expected).max()),
            abs(c_val - (loss_cfg.dice_weight * d_val + loss_cfg.focal_weight * f_val)),
        )
    checks = dict(errors)
    checks["combined_linearity_residual"] = linearity
    checks["threshold"] = GRAD_CHECK_THRESHOLD
    checks["pass"] = all(v < GRAD_CHECK_THRESHOLD for v in errors.values())
    return checks


def _losscheck_pair(cfg: PipelineConfig, seed: int) -> tuple[np.ndarray, np.ndarray, str]:
    """A (pred, target) patch pair: from blob files when configured."""
    if cfg.blob_dir:
        blob_dir = resolve_path(cfg, "blob_dir")
        pred_blobs = sorted(blob_dir.glob("*.pred.bin"))
        for pred_path in pred_blobs:
            target_path = pred_path.with_name(
                pred_path.name.replace(".pred.bin", ".target.bin")
            )
            if target_path.exists():
                return (
                    read_patch_blob(pred_path).astype(np.float64),
                    read_patch_blob(target_path).astype(np.float64),
                    pred_path.name.replace(".pred.bin", ""),
                )
        raise PipelineError(f"no .pred.bin/.target.bin pairs in {blob_dir}")
    side = max(cfg.token_size * 8, cfg.token_size)
    rng = np.random.default_rng(derive_seed(seed, "losscheck-pair"))
    target = rng.normal(loc=-8.0, scale=3.0, size=(side, side))
    pred = target + rng.normal(scale=0.5, size=(side, side))
    return pred, target, "synthetic"


def run_losscheck(cfg: PipelineConfig, seed: int, jobs: int) -> tuple[dict, bool]:
    del jobs  # single instance; nothing to fan out
    pred, target, pair_name = _losscheck_pair(cfg, seed)
    if pred.shape != target.shape:
        raise PipelineError("pred/target patch shapes differ")
    if pred.shape[0] != pred.shape[1]:
        raise PipelineError("loss-check patches must be square")
    side = pred.shape[0]
    if side % cfg.token_size:
        raise PipelineError(
            f"token size {cfg.token_size} does not tile patch side {side}"
        )
    spec = MaskSpec(
        image_size=side, token_size=cfg.token_size, mask_ratio=cfg.mask_ratio,
        seed=derive_seed(seed, "losscheck-mask"),
    )
    mask = expand_token_mask(generate_mask(spec), cfg.token_size)
    wm_cfg = WeightMapConfig(
        decay=cfg.intensity_decay, mean=cfg.intensity_mean,
        std=cfg.intensity_std, normalize=cfg.normalize_weights,
    )
    weights = sar_weight_map(target, wm_cfg, mask)
    recon_value, _ = weighted_l1_loss(pred, target, weights, mask)
    identity_value, identity_grad = weighted_l1_loss(target, target, weights, mask)

    loss_cfg = LossConfig(
        dice_weight=cfg.dice_weight, focal_weight=cfg.focal_weight,
        gamma=cfg.gamma, alpha=cfg.alpha, epsilon=cfg.epsilon,
        dice_denominator=cfg.dice_denominator,
    )
    rng = np.random.default_rng(derive_seed(seed, "losscheck-seg"))
    pixels, classes = 96, 4
    probs = _probability_rows(rng, pixels, classes)
    indices = rng.integers(0, classes, size=pixels)
    hot = one_hot(indices, classes)
    dice_value, _ = dice_loss(probs, hot, loss_cfg)
    focal_value, _ = focal_loss(probs, indices, loss_cfg)
    combined_value, _ = combined_loss(probs, indices, loss_cfg)
    perfect = np.clip(hot, 1e-9, 1.0)
    perfect = perfect / perfect.sum(axis=1, keepdims=True)
    dice_perfect, _ = dice_loss(perfect, hot, loss_cfg)
    focal_perfect, _ = focal_loss(perfect, indices, loss_cfg)

    report = _base_report(cfg, "loss-check", seed)
    report["constants"] = {
        "dice_weight": cfg.dice_weight,
        "focal_weight": cfg.focal_weight,
        "gamma": cfg.gamma,
        "alpha": cfg.alpha,
        "epsilon": cfg.epsilon,
        "dice_denominator": cfg.dice_denominator,
        "calibration_factor": cfg.calibration_factor,
        "mask_ratio": cfg.mask_ratio,
        "token_size": cfg.token_size,
        "intensity_decay": cfg.intensity_decay,
    }
    report["schedules"] = {
        "pretrain": _schedule_summary(
            lr_schedule(
                ScheduleConfig(
                    base_lr=cfg.pretrain_base_lr, min_lr=cfg.pretrain_min_lr,
                    epochs=cfg.pretrain_epochs,
                    warmup_epochs=cfg.pretrain_warmup_epochs,
                )
            )
        ),
        "finetune": _schedule_summary(
            lr_schedule(
                ScheduleConfig(
                    base_lr=cfg.finetune_base_lr, min_lr=cfg.finetune_min_lr,
                    epochs=cfg.finetune_epochs,
                    warmup_epochs=cfg.finetune_warmup_epochs,
                )
            )
        ),
    }
    report["losses"] = {
        "pair": pair_name,
        "masked_tokens": int(spec.masked_tokens),
        "weighted_l1": recon_value,
        "weighted_l1_identity": identity_value,
        "weighted_l1_identity_grad_max": float(np.abs(identity_grad).max()),
        "dice": dice_value,
        "dice_perfect": dice_perfect,
        "focal": focal_value,
        "focal_perfect": focal_perfect,
        "combined": combined_value,
    }
    report["gradient_checks"] = gradient_check_report(cfg, seed)
    write_report(report, resolve_path(cfg, "reports_dir") / "loss_check.json")
    return report, bool(report["gradient_checks"]["pass"])


# ------------------------------------------------------------------- metrics

def _metrics_worker(task):
    name, pred_path, gt_path, mapping, forest, zero, strict = task
    remap = LegendRemap(
        mapping=mapping, forest_classes=forest, zero_weight_classes=zero,
        strict=strict,
    )
    pred = apply_legend(read_geotiff(pred_path, kind=SampleKind.LABEL), remap)
    gt = apply_legend(read_geotiff(gt_path, kind=SampleKind.LABEL), remap)
    return confusion_counts(pred, gt)


def run_metrics(cfg: PipelineConfig, seed: int, jobs: int,
                pred_dir, gt_dir) -> tuple[dict, bool]:
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    preds = _list_scenes(pred_dir)
    legend = _load_legend_for(cfg)
    remap_args = (
        legend.mapping, legend.forest_classes, legend.zero_weight_classes,
        legend.strict,
    )
    tasks = []
    for pred_path in preds:
        gt_path = gt_dir / pred_path.name
        if not gt_path.exists():
            raise PipelineError(f"no ground truth for {pred_path.name}")
        tasks.append((pred_path.stem, str(pred_path), str(gt_path)) + remap_args)
    results = _run_tasks(_metrics_worker, tasks, jobs)
    payloads, failures = _split_results(results, tasks)
    report = _base_report(cfg, "metrics", seed)
    report["pairs"] = len(payloads)
    if payloads:
        summary = metrics_from_confusion(merge_confusions(payloads))
        report["macc"] = summary["macc"]
        report["miou"] = summary["miou"]
        report["per_class_accuracy"] = {
            str(c): v for c, v in sorted(summary["per_class_accuracy"].items())
        }
        report["per_class_iou"] = {
            str(c): v for c, v in sorted(summary["per_class_iou"].items())
        }
        report["pixels"] = summary["pixels"]
    report["failures"] = failures
    write_report(report, resolve_path(cfg, "reports_dir") / "metrics.json")
    return report, not failures

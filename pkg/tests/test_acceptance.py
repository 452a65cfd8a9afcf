"""Binding acceptance checks, one printed verdict line per criterion.

Each test re-derives its expected answer from scratch (exact rational
arithmetic, quadratic scans, pixel loops, finite differences) and prints
a single [PASS]/[FAIL] line on the real stdout even under capture, so a
plain ``pytest tests/test_acceptance.py`` run reads as a checklist.
"""

import hashlib
import json
import math
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from sarpatch.calibration import calibrate_db
from sarpatch.cli import main
from sarpatch.config import default_config
from sarpatch.gradcheck import central_difference_grad, max_relative_error
from sarpatch.geotiff import write_geotiff
from sarpatch.patches import PatchRecord, enumerate_patch_windows, window_is_valid
from sarpatch.pipeline import run_losscheck, run_metrics
from sarpatch.recon_loss import WeightMapConfig, sar_weight_map, weighted_l1_loss
from sarpatch.sampling import (
    CategoryStats,
    SamplePoint,
    accumulate_stats,
    category_weights,
    match_points_to_patches,
    sample_locations,
)
from sarpatch.seg_loss import LossConfig, combined_loss, dice_loss, focal_loss, one_hot
from sarpatch.synthetic import build_workspace

from conftest import make_dn_grid, make_label_grid


@pytest.fixture
def announce(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)

    return emit


# --- criterion 1: inverse-frequency weights against exact rational arithmetic


def test_category_weights_match_rational_oracle(announce):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    scale_worst = 0.0
    order_violations = 0
    for _ in range(1000):
        k = int(rng.integers(2, 21))
        ids = rng.choice(5000, size=k, replace=False)
        counts = {
            int(c): int(n)
            for c, n in zip(ids, rng.integers(1, 10**9, size=k, endpoint=True))
        }
        weights = category_weights(CategoryStats(counts=dict(counts)))
        total = sum(counts.values())
        inverse = {c: Fraction(total, n) for c, n in counts.items()}
        denom = sum(inverse.values())
        for c in counts:
            err = abs(weights.normalized[c] - float(inverse[c] / denom))
            worst = max(worst, err)
        # rarer class never gets the smaller weight; equal counts tie exactly
        by_count = sorted(counts, key=counts.__getitem__)
        for a, b in zip(by_count, by_count[1:]):
            w_a, w_b = weights.normalized[a], weights.normalized[b]
            if counts[a] == counts[b]:
                if w_a != w_b:
                    order_violations += 1
            elif w_a <= w_b:
                order_violations += 1
        # multiplying every count by the same factor changes nothing
        scaled = category_weights(
            CategoryStats(counts={c: 7 * n for c, n in counts.items()})
        )
        for c in counts:
            scale_worst = max(
                scale_worst, abs(scaled.normalized[c] - weights.normalized[c])
            )
    elapsed = time.perf_counter() - start
    ok = (worst <= 1e-12 and scale_worst <= 1e-12 and order_violations == 0
          and elapsed < 5.0)
    announce(
        "category-weights-oracle", ok,
        f"max |err| {worst:.2e}, scale drift {scale_worst:.1e}, "
        f"{order_violations} order violations over 1000 histograms "
        f"in {elapsed:.2f}s (tol 1e-12, budget 5s)",
    )
    assert worst <= 1e-12
    assert scale_worst <= 1e-12
    assert order_violations == 0
    assert elapsed < 5.0


# --- criterion 2: drawn class marginals track the weights at scale


def test_sampled_marginals_match_weights(announce):
    side = 4096
    unit = (side * side) // 31  # counts 15:10:6 invert to weights 0.2:0.3:0.5
    counts = {1: 15 * unit, 2: 10 * unit, 3: 6 * unit}
    flat = np.zeros(side * side, dtype=np.uint8)
    stop = 0
    for cls, n in counts.items():
        flat[stop : stop + n] = cls
        stop += n
    np.random.default_rng(202).shuffle(flat)  # leftover pixels stay nodata
    grid = make_label_grid(flat.reshape(side, side))

    start = time.perf_counter()
    weights = category_weights(accumulate_stats([grid]))
    expected = {1: 0.2, 2: 0.3, 3: 0.5}
    for cls, share in expected.items():
        assert weights.normalized[cls] == pytest.approx(share, abs=1e-12)

    n_points = 200_000
    points = sample_locations(grid, weights, n_points, seed=7, raster_id="big")
    elapsed = time.perf_counter() - start
    freq = Counter(p.class_id for p in points)
    gap = max(abs(freq[c] / n_points - share) for c, share in expected.items())
    ok = len(points) == n_points and gap <= 0.02 and elapsed < 30.0
    announce(
        "balanced-sampling-marginals", ok,
        f"{n_points} draws from a {side}x{side} raster, worst marginal gap "
        f"{gap:.4f} (tol 0.02) in {elapsed:.2f}s (budget 30s)",
    )
    assert len(points) == n_points
    assert gap <= 0.02
    assert elapsed < 30.0


# --- criterion 3: window validity by pixel scan, dB calibration by decades


def test_patch_windows_and_calibration_are_exact(announce):
    side, patch = 1024, 256
    rng = np.random.default_rng(303)
    dn = rng.integers(1, 4001, size=(side, side), dtype=np.uint16)
    dn[:, :100] = 0          # west margin
    dn[300:340, :] = 0       # full-width band
    dn[700:780, 520:600] = 0  # interior block
    dn[900, 900] = 0         # lone pixel
    labels = rng.integers(1, 6, size=(side, side), dtype=np.uint8)
    labels[512:563, 768:881] = 0  # annotation gap
    sar = make_dn_grid(dn)
    lab = make_label_grid(labels)

    windows = enumerate_patch_windows(side, side, patch)
    assert len(windows) == 16
    mismatches = 0
    for allow_gaps in (False, True):
        got = {
            w for w in windows if window_is_valid(sar, lab, *w, patch, allow_gaps)
        }
        oracle = set()
        for col0, row0 in windows:
            usable = True
            for r in range(row0, row0 + patch):
                for c in range(col0, col0 + patch):
                    if dn[r, c] == 0 or (not allow_gaps and labels[r, c] == 0):
                        usable = False
                        break
                if not usable:
                    break
            if usable:
                oracle.add((col0, row0))
        if got != oracle:
            mismatches += 1

    db = calibrate_db(make_dn_grid(np.array([[1, 10], [100, 0]], dtype=np.uint16)))
    expected = np.array([[-83.0, -63.0], [-43.0, np.nan]])
    cal_err = float(np.nanmax(np.abs(np.asarray(db.samples) - expected)))
    cal_ok = cal_err <= 1e-6 and math.isnan(db.samples[1, 1])
    ok = mismatches == 0 and cal_ok
    announce(
        "patch-windows-and-calibration", ok,
        f"{len(windows)} windows vs pixel-scan oracle (both gap modes), "
        f"decade counts off by {cal_err:.1e} dB (tol 1e-6)",
    )
    assert mismatches == 0
    assert cal_ok


# --- criterion 4: point-to-patch matching against the quadratic scan


def test_point_matching_equals_quadratic_oracle(announce):
    size_m = 2560.0  # 256 px at 10 m
    records = []
    keep = np.random.default_rng(404)
    for scene, (ox, oy) in enumerate([(0.0, 0.0), (30_000.0, 5_000.0)]):
        for r in range(6):
            for c in range(6):
                if keep.random() < 0.2:
                    continue  # holes make "no patch" a real outcome
                min_x = ox + c * size_m
                max_y = oy - r * size_m
                records.append(
                    PatchRecord(
                        patch_id=f"s{scene}_r{r}_c{c}", scene_id=f"s{scene}",
                        col0=c * 256, row0=r * 256, size=256,
                        min_x=min_x, min_y=max_y - size_m,
                        max_x=min_x + size_m, max_y=max_y,
                    )
                )

    rng = np.random.default_rng(405)
    points = [
        SamplePoint(
            raster_id="pts", col=0, row=0, class_id=1,
            x=float(rng.uniform(-3_000, 50_000)),
            y=float(rng.uniform(-18_000, 8_000)),
        )
        for _ in range(10_000)
    ]
    # interior shared edges: x on a column seam, y on a row seam, and a corner
    for x, y in [(size_m, -100.0), (2 * size_m, -size_m), (size_m, -size_m),
                 (0.0, 0.0), (6 * size_m, -6 * size_m)]:
        points.append(SamplePoint(raster_id="pts", col=0, row=0, class_id=1, x=x, y=y))

    got_ids, got_unmatched = match_points_to_patches(points, records, chunk=512)
    oracle_ids = set()
    oracle_unmatched = 0
    for p in points:
        for rec in records:
            if rec.min_x <= p.x < rec.max_x and rec.min_y < p.y <= rec.max_y:
                oracle_ids.add(rec.patch_id)
                break
        else:
            oracle_unmatched += 1
    ok = got_ids == oracle_ids and got_unmatched == oracle_unmatched
    announce(
        "point-to-patch-matching", ok,
        f"{len(points)} points x {len(records)} patches: {len(got_ids)} patches "
        f"selected, {got_unmatched} unmatched, oracle agrees exactly",
    )
    assert got_ids == oracle_ids
    assert got_unmatched == oracle_unmatched


# --- criterion 5: every analytic gradient against central differences


def _seg_instance(rng, pixels=16, classes=4):
    raw = rng.dirichlet(np.ones(classes), size=pixels)
    pred = (raw + 0.05) / (1.0 + classes * 0.05)  # entries clear of 0, 1, and gt
    gt = rng.integers(0, classes, size=pixels)
    gt[rng.random(pixels) < 0.15] = -1
    if (gt >= 0).sum() == 0:
        gt[0] = 0
    return pred, gt


def _recon_instance(rng, side=8):
    target = rng.normal(size=(side, side))
    offsets = rng.choice([-1.0, 1.0], size=(side, side)) * rng.uniform(
        0.01, 1.0, size=(side, side)
    )  # offsets >= 0.01 keep |pred - target| clear of the sign tie at 10*h
    pred = target + offsets
    mask = rng.random((side, side)) < 0.5
    if not mask.any():
        mask[0, 0] = True
    cfg = WeightMapConfig(
        decay=0.8, mean=float(target.mean()), std=float(target.std()) + 0.1
    )
    weights = sar_weight_map(target, cfg, mask)
    return pred, target, weights, mask


def test_gradient_suite_against_finite_differences(announce):
    rng = np.random.default_rng(505)
    instances = 100
    worst = {
        "weighted_l1": 0.0, "dice_conventional": 0.0, "dice_max_union": 0.0,
        "focal": 0.0, "combined": 0.0,
    }
    linearity = 0.0
    for _ in range(instances):
        pred, target, weights, mask = _recon_instance(rng)
        _, grad = weighted_l1_loss(pred, target, weights, mask)
        numeric = central_difference_grad(
            lambda p: weighted_l1_loss(p, target, weights, mask)[0], pred
        )
        worst["weighted_l1"] = max(worst["weighted_l1"], max_relative_error(grad, numeric))

        probs, gt = _seg_instance(rng)
        gt_hot = one_hot(gt, probs.shape[1])
        for key, mode in (("dice_conventional", "conventional_sums"),
                          ("dice_max_union", "max_union")):
            cfg = LossConfig(dice_denominator=mode)
            _, grad = dice_loss(probs, gt_hot, cfg)
            numeric = central_difference_grad(
                lambda p: dice_loss(p, gt_hot, cfg)[0], probs
            )
            worst[key] = max(worst[key], max_relative_error(grad, numeric))

        _, grad = focal_loss(probs, gt)
        numeric = central_difference_grad(lambda p: focal_loss(p, gt)[0], probs)
        worst["focal"] = max(worst["focal"], max_relative_error(grad, numeric))

        total, grad = combined_loss(probs, gt)
        numeric = central_difference_grad(lambda p: combined_loss(p, gt)[0], probs)
        worst["combined"] = max(worst["combined"], max_relative_error(grad, numeric))

        dice_value, dice_grad = dice_loss(probs, gt_hot)
        focal_value, focal_grad = focal_loss(probs, gt)
        linearity = max(
            linearity,
            abs(total - (0.32 * dice_value + 0.57 * focal_value)),
            float(np.abs(grad - (0.32 * dice_grad + 0.57 * focal_grad)).max()),
        )
    ok = max(worst.values()) < 1e-5 and linearity < 1e-12
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    announce(
        "loss-gradient-suite", ok,
        f"{instances} instances each: {detail}; linearity {linearity:.1e} "
        "(tol 1e-5 / 1e-12)",
    )
    for key, value in worst.items():
        assert value < 1e-5, key
    assert linearity < 1e-12


# --- criterion 6: the loss-check report echoes the training constants


def test_losscheck_echoes_constants_and_schedules(announce, tmp_path):
    cfg = default_config()
    cfg.workspace = str(tmp_path)
    report, okay = run_losscheck(cfg, seed=0, jobs=1)
    constants = report["constants"]
    pre = report["schedules"]["pretrain"]
    fine = report["schedules"]["finetune"]
    checks = [
        constants["dice_weight"] == 0.32,
        constants["focal_weight"] == 0.57,
        constants["gamma"] == 1.1,
        constants["alpha"] == 0.35,
        pre["base_lr"] == 1e-4 and pre["min_lr"] == 5e-7,
        pre["epochs"] == 800 and pre["warmup_epochs"] == 40,
        pre["lr_warmup_end"] == 1e-4 and pre["lr_final"] == 5e-7,
        fine["base_lr"] == 1.25e-4 and fine["min_lr"] == 2.5e-7,
        fine["epochs"] == 100 and fine["warmup_epochs"] == 20,
        fine["lr_warmup_end"] == 1.25e-4 and fine["lr_final"] == 2.5e-7,
        okay,
    ]
    ok = all(checks)
    announce(
        "constants-and-schedule-echo", ok,
        "0.32/0.57/1.1/0.35 and both schedule endpoint pairs echoed exactly"
        if ok else f"failed checks at positions {[i for i, c in enumerate(checks) if not c]}",
    )
    assert ok


# --- criterion 7: the metrics command against an exact confusion scan


def test_metrics_command_matches_exact_confusion(announce, tmp_path):
    rng = np.random.default_rng(707)
    pred_dir = tmp_path / "pred"
    gt_dir = tmp_path / "gt"
    pred_dir.mkdir()
    gt_dir.mkdir()
    arrays = {}
    for name in ("a", "b"):
        gt = rng.integers(0, 6, size=(64, 64), dtype=np.uint8)
        pred = np.where(rng.random((64, 64)) < 0.7, gt, rng.integers(0, 6, size=(64, 64))).astype(np.uint8)
        arrays[name] = (pred, gt)
        write_geotiff(make_label_grid(pred), pred_dir / f"{name}.tif")
        write_geotiff(make_label_grid(gt), gt_dir / f"{name}.tif")

    cfg = default_config()
    cfg.workspace = str(tmp_path)
    report, okay = run_metrics(cfg, 0, 1, pred_dir, gt_dir)

    confusion = Counter()
    for pred, gt in arrays.values():
        for r in range(64):
            for c in range(64):
                if gt[r, c] != 0 and pred[r, c] != 0:
                    confusion[(int(gt[r, c]), int(pred[r, c]))] += 1
    gt_classes = sorted({g for g, _ in confusion})
    all_classes = sorted({c for pair in confusion for c in pair})
    acc = {
        str(c): confusion[(c, c)] / sum(n for (g, _), n in confusion.items() if g == c)
        for c in gt_classes
    }
    iou = {}
    for c in all_classes:
        tp = confusion[(c, c)]
        union = (
            sum(n for (g, _), n in confusion.items() if g == c)
            + sum(n for (_, p), n in confusion.items() if p == c)
            - tp
        )
        iou[str(c)] = tp / union
    exact = (
        okay
        and report["per_class_accuracy"] == acc
        and report["per_class_iou"] == iou
        and report["macc"] == sum(acc.values()) / len(acc)
        and report["miou"] == sum(iou.values()) / len(iou)
        and report["pixels"] == sum(confusion.values())
    )

    ident, _ = run_metrics(cfg, 0, 1, gt_dir, gt_dir)
    perfect = ident["macc"] == 1.0 and ident["miou"] == 1.0
    ok = exact and perfect
    announce(
        "metrics-oracle", ok,
        f"random 64x64 pairs reproduce the pixel-scan confusion exactly "
        f"(macc {report['macc']:.4f}, miou {report['miou']:.4f}); perfect pair scores 1/1",
    )
    assert exact
    assert perfect


# --- criterion 8: deterministic outputs across reruns and worker counts


def _artifact_digests(root):
    digests = {}
    for sub in ("downsampled", "aligned_labels", "patches"):
        base = root / sub
        for path in sorted(base.rglob("*")):
            if path.is_file():
                digests[str(path.relative_to(root))] = hashlib.sha256(
                    path.read_bytes()
                ).hexdigest()
    return digests


def test_pipeline_is_deterministic(announce, tmp_path):
    root = tmp_path / "ws"
    config = str(build_workspace(root, seed=0, n_scenes=3, scene_size=512,
                                 patch_size=64, sample_points=400))
    stages = ("downsample", "labels", "patchify", "sample")
    scratch = tmp_path / "report.json"

    start = time.perf_counter()
    for stage in stages:
        code = main([stage, "--config", config, "--seed", "0", "--jobs", "1",
                     "--out", str(scratch)])
        assert code == 0, stage
    elapsed = time.perf_counter() - start
    first = _artifact_digests(root)
    assert any(name.endswith("manifest_sampled.jsonl") for name in first)

    for jobs in ("1", "8"):
        for stage in stages:
            code = main([stage, "--config", config, "--seed", "0", "--jobs", jobs,
                         "--out", str(scratch)])
            assert code == 0, (stage, jobs)
        rerun = _artifact_digests(root)
        assert rerun == first, f"outputs changed under --jobs {jobs}"

    sampled = (root / "patches" / "manifest_sampled.jsonl").read_text().strip()
    n_sampled = len(sampled.splitlines())
    ok = elapsed < 60.0
    announce(
        "pipeline-determinism", ok,
        f"3-scene run in {elapsed:.1f}s (budget 60s); {len(first)} artifacts "
        f"({n_sampled} sampled patches) byte-identical across reruns and --jobs 1 vs 8",
    )
    assert elapsed < 60.0


def test_reports_are_valid_json(tmp_path):
    """Reports written by the full chain parse and carry provenance."""
    root = tmp_path / "ws"
    config = str(build_workspace(root, seed=1, n_scenes=1, scene_size=256,
                                 patch_size=64, sample_points=30))
    for stage in ("downsample", "labels", "patchify", "sample"):
        assert main([stage, "--config", config, "--out",
                     str(tmp_path / "out.json")]) == 0
    for stage in ("downsample", "labels", "patchify", "sample"):
        report = json.loads((root / "reports" / f"{stage}.json").read_text())
        assert report["command"] == stage
        assert len(report["config_hash"]) == 12

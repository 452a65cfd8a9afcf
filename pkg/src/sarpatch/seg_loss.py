"""Segmentation losses: soft dice, focal, and their weighted combination.

Inputs are flat per-pixel class probabilities of shape (pixels, classes).
Ground truth arrives either one-hot (dice) or as class indices with -1
marking unlabeled pixels (focal, combined); unlabeled pixels contribute
nothing to sums, means, or gradients.

Two dice denominators are provided. ``max_union`` scores overlap against
the sum of pixel-wise maxima, which makes a perfect prediction score -1
rather than 0; ``conventional_sums`` uses the usual sum of both masses
and is the default. Both are exact about their own optimum; neither is a
guess about the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_CLAMP = 1e-7
# probability validation: range is strict, row sums are checked loosely so
# finite-difference probes (offsets ~1e-4) remain admissible inputs
PROB_RANGE_TOL = 1e-6
ROW_SUM_TOL = 1e-3

DICE_MODES = ("conventional_sums", "max_union")


@dataclass(frozen=True)
class LossConfig:
    dice_weight: float = 0.32
    focal_weight: float = 0.57
    gamma: float = 1.1
    alpha: float = 0.35
    epsilon: float = 1e-6
    dice_denominator: str = "conventional_sums"
    alpha_per_class: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dice_weight < 0 or self.focal_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.dice_denominator not in DICE_MODES:
            raise ValueError(f"dice_denominator must be one of {DICE_MODES}")
        if self.alpha_per_class is not None:
            if any(not 0 < a <= 1 for a in self.alpha_per_class):
                raise ValueError("per-class alpha entries must lie in (0, 1]")


def one_hot(indices: np.ndarray, n_classes: int) -> np.ndarray:
    """Index vector to one-hot rows; -1 rows come out all-zero (unlabeled)."""
    indices = np.asarray(indices)
    if indices.ndim != 1:
        raise ValueError("class indices must be 1-D")
    if indices.max(initial=-1) >= n_classes:
        raise ValueError("class index exceeds channel count")
    out = np.zeros((indices.size, n_classes), dtype=np.float64)
    valid = indices >= 0
    out[np.flatnonzero(valid), indices[valid]] = 1.0
    return out


def _check_probabilities(pred: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim != 2:
        raise ValueError("predictions must be (pixels, classes)")
    if pred.min(initial=0.0) < -PROB_RANGE_TOL or pred.max(initial=0.0) > 1.0 + PROB_RANGE_TOL:
        raise ValueError("predictions are not probabilities (outside [0, 1])")
    sums = pred.sum(axis=1)
    if pred.shape[1] and np.abs(sums - 1.0).max(initial=0.0) > ROW_SUM_TOL:
        raise ValueError("prediction rows must sum to 1")
    return pred


def dice_loss(pred: np.ndarray, gt: np.ndarray,
              cfg: LossConfig | None = None) -> tuple[float, np.ndarray]:
    """Soft dice over one-hot ground truth, averaged over class channels.

    Per class c over labeled pixels: I_c = sum min(p, g) and either
    U_c = sum max(p, g) (max_union) or D_c = sum p + sum g
    (conventional_sums); the class term is 1 - 2*I_c/(den_c + eps). Ties
    p == g take subgradient 0.5 on both min and max. A channel absent
    from the ground truth still participates in the mean (its term tends
    to 1), so fixtures compare like against like.
    """
    if cfg is None:
        cfg = LossConfig()
    pred = _check_probabilities(pred)
    gt = np.asarray(gt, dtype=np.float64)
    if gt.shape != pred.shape:
        raise ValueError(f"gt shape {gt.shape} != pred shape {pred.shape}")
    row_sums = gt.sum(axis=1)
    if not np.isin(gt, (0.0, 1.0)).all() or not np.isin(row_sums, (0.0, 1.0)).all():
        raise ValueError("gt must be one-hot with all-zero rows for unlabeled pixels")
    valid = row_sums > 0
    if not valid.any():
        raise ValueError("no labeled pixels")
    p = pred[valid]
    g = gt[valid]
    n_classes = pred.shape[1]
    intersection = np.minimum(p, g).sum(axis=0)
    d_inter = np.where(p < g, 1.0, np.where(p > g, 0.0, 0.5))
    if cfg.dice_denominator == "max_union":
        union = np.maximum(p, g).sum(axis=0)
        denom = union + cfg.epsilon
        d_denom = np.where(p > g, 1.0, np.where(p < g, 0.0, 0.5))
    else:
        denom = p.sum(axis=0) + g.sum(axis=0) + cfg.epsilon
        d_denom = np.ones_like(p)
    loss = float(np.mean(1.0 - 2.0 * intersection / denom))
    # quotient rule per class, then mean over classes
    d_term = -2.0 * (d_inter * denom - intersection * d_denom) / (denom * denom)
    grad = np.zeros_like(pred)
    grad[valid] = d_term / n_classes
    return loss, grad


def focal_loss(pred: np.ndarray, gt: np.ndarray,
               cfg: LossConfig | None = None) -> tuple[float, np.ndarray]:
    """Focal loss, mean over labeled pixels.

    gt holds class indices, -1 for unlabeled. Per pixel the loss is
    -alpha * (1 - p_t)^gamma * log(p_t) with p_t the true-class
    probability clamped to [1e-7, 1 - 1e-7]; natural log. The gradient
    lands only on each pixel's true-class entry and is zero where the
    clamp is active.
    """
    if cfg is None:
        cfg = LossConfig()
    pred = _check_probabilities(pred)
    gt = np.asarray(gt)
    if gt.shape != (pred.shape[0],):
        raise ValueError(f"gt shape {gt.shape} != (pixels,) = ({pred.shape[0]},)")
    if gt.max(initial=-1) >= pred.shape[1]:
        raise ValueError("class index exceeds channel count")
    valid = np.flatnonzero(gt >= 0)
    if valid.size == 0:
        raise ValueError("no labeled pixels")
    classes = gt[valid].astype(np.int64)
    p_raw = pred[valid, classes]
    p_t = np.clip(p_raw, PROB_CLAMP, 1.0 - PROB_CLAMP)
    if cfg.alpha_per_class is not None:
        alpha = np.asarray(cfg.alpha_per_class, dtype=np.float64)[classes]
    else:
        alpha = cfg.alpha
    one_minus = 1.0 - p_t
    log_p = np.log(p_t)
    per_pixel = -alpha * np.power(one_minus, cfg.gamma) * log_p
    loss = float(per_pixel.mean())
    # d/dp [-a (1-p)^g ln p] = a [ g (1-p)^(g-1) ln p - (1-p)^g / p ]
    if cfg.gamma == 0.0:
        d_pt = -alpha / p_t
    else:
        d_pt = alpha * (
            cfg.gamma * np.power(one_minus, cfg.gamma - 1.0) * log_p
            - np.power(one_minus, cfg.gamma) / p_t
        )
    inside = (p_raw >= PROB_CLAMP) & (p_raw <= 1.0 - PROB_CLAMP)
    grad = np.zeros_like(pred)
    grad[valid, classes] = np.where(inside, d_pt, 0.0) / valid.size
    return loss, grad


def combined_loss(pred: np.ndarray, gt: np.ndarray,
                  cfg: LossConfig | None = None) -> tuple[float, np.ndarray]:
    """dice_weight * dice + focal_weight * focal over index ground truth.

    The component weights are used exactly as configured even though the
    defaults do not sum to 1. The gradient is the identical linear
    combination of the component gradients.
    """
    if cfg is None:
        cfg = LossConfig()
    pred = _check_probabilities(pred)
    gt_hot = one_hot(np.asarray(gt), pred.shape[1])
    dice_value, dice_grad = dice_loss(pred, gt_hot, cfg)
    focal_value, focal_grad = focal_loss(pred, gt, cfg)
    loss = cfg.dice_weight * dice_value + cfg.focal_weight * focal_value
    grad = cfg.dice_weight * dice_grad + cfg.focal_weight * focal_grad
    return float(loss), grad

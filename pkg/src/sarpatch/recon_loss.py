"""Intensity-weighted masked reconstruction loss with analytic gradient.

Speckle and rare very-bright returns dominate a plain masked MAE on SAR
patches. The weight map down-weights pixels far from a reference
intensity: standardize, then w = exp(-decay * |z|). The exact functional
form used by the weighted-MIM line of work is not published; this family
realizes the stated intent (monotone suppression of extremes) and turns
itself off at decay = 0, where the loss reduces to ordinary masked MAE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WeightMapConfig:
    """Standardization constants and decay for the intensity weight map.

    ``mean`` and ``std`` are in dB and usually come from corpus statistics.
    With ``normalize`` the weights are rescaled so their mean over masked
    pixels is exactly 1, which keeps the loss magnitude comparable across
    decay settings.
    """

    decay: float = 1.0
    mean: float = 0.0
    std: float = 1.0
    normalize: bool = True

    def __post_init__(self):
        if self.decay < 0:
            raise ValueError("decay must be non-negative")
        if self.std <= 0:
            raise ValueError("std must be positive")


def sar_weight_map(target: np.ndarray, cfg: WeightMapConfig,
                   mask: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel weights for a dB target patch.

    ``mask`` is a pixel-level boolean array (True = reconstructed); it is
    required when cfg.normalize so the masked-mean can be pinned to 1, and
    must then select at least one pixel.
    """
    target = np.asarray(target, dtype=np.float64)
    if not np.isfinite(target).all():
        raise ValueError("weight map input must be finite; mask nodata upstream")
    z = (target - cfg.mean) / cfg.std
    weights = np.exp(-cfg.decay * np.abs(z))
    if cfg.normalize:
        if mask is None:
            raise ValueError("normalization needs the pixel mask")
        if mask.shape != target.shape:
            raise ValueError(f"mask shape {mask.shape} != target shape {target.shape}")
        masked = weights[mask]
        if masked.size == 0:
            raise ValueError("cannot normalize over an empty mask")
        weights = weights / masked.mean()
    return weights


def weighted_l1_loss(pred: np.ndarray, target: np.ndarray, weights: np.ndarray,
                     mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted mean absolute error over masked pixels, with gradient.

    loss = sum_masked(w * |pred - target|) / sum_masked(w). The gradient
    with respect to pred is w * sign(pred - target) / sum_masked(w) on
    masked pixels (zero at exact ties) and zero elsewhere. Scaling all
    weights by a positive constant changes nothing.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not (pred.shape == target.shape == weights.shape == mask.shape):
        raise ValueError(
            f"shape mismatch: pred {pred.shape}, target {target.shape}, "
            f"weights {weights.shape}, mask {mask.shape}"
        )
    if not mask.any():
        raise ValueError("empty mask: nothing to reconstruct")
    total_weight = float(weights[mask].sum())
    if total_weight <= 0.0:
        raise ValueError("masked weights sum to zero")
    diff = pred - target
    loss = float((weights[mask] * np.abs(diff[mask])).sum() / total_weight)
    grad = np.zeros_like(pred)
    grad[mask] = weights[mask] * np.sign(diff[mask]) / total_weight
    return loss, grad

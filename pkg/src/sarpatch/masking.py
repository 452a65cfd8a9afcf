"""Token-grid mask generation and the two corruption schemes.

Masking operates on a coarse grid of square tokens tiling the patch. A
mask is a boolean token grid (True = hidden); pixel-space operations
expand it by block replication. Mask draws use the in-package generator,
so a MaskSpec fully determines the mask on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Xoshiro256StarStar, derive_seed

DEFAULT_TOKEN_SIZE = 32
DEFAULT_MASK_RATIO = 0.6


@dataclass(frozen=True)
class MaskSpec:
    """Geometry and strength of one token mask draw."""

    image_size: int
    token_size: int = DEFAULT_TOKEN_SIZE
    mask_ratio: float = DEFAULT_MASK_RATIO
    seed: int = 0

    def __post_init__(self):
        if self.image_size <= 0 or self.token_size <= 0:
            raise ValueError("sizes must be positive")
        if self.image_size % self.token_size != 0:
            raise ValueError(
                f"token size {self.token_size} does not tile image size {self.image_size}"
            )
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError("mask_ratio must lie in [0, 1]")

    @property
    def tokens_per_side(self) -> int:
        return self.image_size // self.token_size

    @property
    def total_tokens(self) -> int:
        return self.tokens_per_side ** 2

    @property
    def masked_tokens(self) -> int:
        # round half up; banker's rounding would make the count depend on
        # parity at exact .5 boundaries
        return int(self.mask_ratio * self.total_tokens + 0.5)


def generate_mask(spec: MaskSpec) -> np.ndarray:
    """Boolean token grid with exactly spec.masked_tokens True entries.

    Token indices are shuffled under ``spec.seed`` and the first
    masked_tokens of them hidden. Equal specs give equal masks.
    """
    n = spec.total_tokens
    order = list(range(n))
    rng = Xoshiro256StarStar(derive_seed(spec.seed, "token-mask"))
    rng.shuffle(order)
    mask = np.zeros(n, dtype=bool)
    mask[order[: spec.masked_tokens]] = True
    return mask.reshape(spec.tokens_per_side, spec.tokens_per_side)


def expand_token_mask(mask: np.ndarray, token_size: int) -> np.ndarray:
    """Replicate each token of a boolean grid into a token_size² pixel block."""
    if mask.dtype != bool or mask.ndim != 2:
        raise ValueError("token mask must be a 2-D boolean array")
    return np.repeat(np.repeat(mask, token_size, axis=0), token_size, axis=1)


def _pixel_mask_for(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if image.ndim != 2 or mask.ndim != 2:
        raise ValueError("expected 2-D image and 2-D token mask")
    if mask.shape[0] == 0 or mask.shape[1] == 0:
        raise ValueError("empty token mask")
    if image.shape[0] % mask.shape[0] or image.shape[1] % mask.shape[1]:
        raise ValueError(f"token grid {mask.shape} does not tile image {image.shape}")
    ty = image.shape[0] // mask.shape[0]
    tx = image.shape[1] // mask.shape[1]
    if ty != tx:
        raise ValueError("tokens must be square")
    return expand_token_mask(mask.astype(bool), ty)


def simmim_corrupt(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero out every pixel under a masked token; copy the rest."""
    pixel_mask = _pixel_mask_for(image, mask)
    out = np.array(image, copy=True)
    out[pixel_mask] = 0
    return out


def mixmae_mix(image_a: np.ndarray, image_b: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Fill masked tokens from a second image instead of zeros."""
    if image_a.shape != image_b.shape:
        raise ValueError(f"image shapes differ: {image_a.shape} vs {image_b.shape}")
    pixel_mask = _pixel_mask_for(image_a, mask)
    return np.where(pixel_mask, image_b, image_a)

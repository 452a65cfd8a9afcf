"""Central finite-difference gradient verification."""

from __future__ import annotations

from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-4
REL_FLOOR = 1e-8


def central_difference_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
                            h: float = DEFAULT_STEP) -> np.ndarray:
    """Numerical gradient of a scalar function, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    probe = x.copy()
    probe_flat = probe.reshape(-1)
    base_flat = x.reshape(-1)
    for i in range(base_flat.size):
        original = base_flat[i]
        probe_flat[i] = original + h
        upper = f(probe)
        probe_flat[i] = original - h
        lower = f(probe)
        probe_flat[i] = original
        flat[i] = (upper - lower) / (2.0 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-case |a - n| / max(|a|, |n|, floor) over all entries."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise ValueError("gradient shapes differ")
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return float((np.abs(analytic - numeric) / scale).max())

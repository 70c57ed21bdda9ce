"""Input validation helpers shared across the package.

Images are plain numpy arrays of shape (H, W, 3) with float values in
[0, 1], channel order R, G, B. Everything that accepts an image funnels
through :func:`check_image` so the invariants are enforced in one place.
"""

from __future__ import annotations

import numpy as np


def check_image(image, name: str = "image") -> np.ndarray:
    """Validate an RGB image in [0, 1] and return it as float32.

    Raises ValueError when the array is not H x W x 3, contains
    non-finite values, or leaves the [0, 1] range.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(
            f"{name} must have shape (H, W, 3), got {arr.shape}"
        )
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} has an empty spatial dimension: {arr.shape}")
    arr = arr.astype(np.float32, copy=False)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    lo, hi = float(arr.min()), float(arr.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1], got [{lo}, {hi}]")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} must have equal shapes: {a.shape} vs {b.shape}")


def check_vector_pair(a, b, min_length: int = 2):
    """Validate two equal-length 1-D float vectors for correlation ops."""
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    if va.shape != vb.shape:
        raise ValueError(f"length mismatch: {va.shape[0]} vs {vb.shape[0]}")
    if va.shape[0] < min_length:
        raise ValueError(f"need at least {min_length} elements, got {va.shape[0]}")
    if not (np.isfinite(va).all() and np.isfinite(vb).all()):
        raise ValueError("vectors contain non-finite values")
    return va, vb


def check_not_constant(v: np.ndarray, name: str = "vector") -> None:
    if np.ptp(v) == 0.0:
        raise ValueError(f"{name} is constant")


def check_fraction(x: float, name: str = "fraction") -> float:
    x = float(x)
    if not 0.0 < x < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {x}")
    return x


def check_seed(seed) -> int:
    s = int(seed)
    if s < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    return s

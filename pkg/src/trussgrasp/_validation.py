"""Input validation helpers shared by the estimators."""

from enum import IntEnum

import numpy as np


class Label(IntEnum):
    BACKGROUND = 0
    STEM = 1
    TOMATO = 2


def check_rgb_image(img, name="image"):
    """Return ``img`` as a contiguous ``(H, W, 3)`` uint8 array.

    Float images in [0, 1] are accepted and rescaled; anything else with the
    wrong shape or dtype raises ``ValueError``.
    """
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1")
    if arr.dtype == np.uint8:
        return np.ascontiguousarray(arr)
    if np.issubdtype(arr.dtype, np.floating):
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(f"float {name} must lie in [0, 1]")
        return np.ascontiguousarray(np.round(arr * 255.0).astype(np.uint8))
    if np.issubdtype(arr.dtype, np.integer):
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError(f"integer {name} must lie in [0, 255]")
        return np.ascontiguousarray(arr.astype(np.uint8))
    raise ValueError(f"unsupported {name} dtype {arr.dtype}")


def check_label_mask(mask, name="mask"):
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > max(Label)):
        raise ValueError(f"{name} holds values outside the label set")
    return np.ascontiguousarray(arr.astype(np.uint8, copy=False))


def check_binary(img, name="image"):
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def check_points(points, name="points"):
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    return arr


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive number, got {value}")
    return value

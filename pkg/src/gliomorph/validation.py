"""Input validation helpers shared by the estimators and functional API."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .errors import DegenerateInputError, GliomorphError
from .volume import KIND_MASK, VoxelVolume


def check_volume(v, kind: Optional[str] = None, name: str = "volume") -> VoxelVolume:
    if not isinstance(v, VoxelVolume):
        raise TypeError(f"{name} must be a VoxelVolume, got {type(v).__name__}")
    if kind is not None and v.kind != kind:
        raise GliomorphError(f"{name} must have kind {kind!r}, got {v.kind!r}")
    return v


def check_mask(v, name: str = "mask") -> VoxelVolume:
    return check_volume(v, kind=KIND_MASK, name=name)


def check_same_grid(a: VoxelVolume, b: VoxelVolume, names=("a", "b")) -> None:
    if a.dims != b.dims:
        raise GliomorphError(f"{names[0]} has dims {a.dims} but {names[1]} has {b.dims}")
    if a.spacing != b.spacing:
        raise GliomorphError(f"{names[0]} has spacing {a.spacing} but {names[1]} has {b.spacing}")


def check_fraction_pair(p_low: float, p_high: float) -> Tuple[float, float]:
    p_low, p_high = float(p_low), float(p_high)
    if not (0.0 <= p_low < p_high <= 1.0):
        raise GliomorphError(f"need 0 <= p_low < p_high <= 1, got ({p_low}, {p_high})")
    return p_low, p_high


def check_slice_mask(arr, name: str = "slice_mask") -> np.ndarray:
    """Validate a 2D binary slice and return it as a uint8 array."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise GliomorphError(f"{name} must be 2D, got shape {arr.shape}")
    values = np.unique(arr)
    if values.size and not np.isin(values, (0, 1)).all():
        raise GliomorphError(f"{name} must be binary with values in {{0,1}}")
    return arr.astype(np.uint8, copy=False)


def check_nonempty_mask(v: VoxelVolume, name: str = "mask") -> VoxelVolume:
    check_mask(v, name=name)
    if not v.data.any():
        raise DegenerateInputError(f"{name} is empty")
    return v


def split_cases(X) -> Tuple[list, list]:
    """Split estimator input into (volumes, brain_masks).

    Accepts either a sequence of VoxelVolume or a sequence of
    ``(volume, brain_mask_or_None)`` pairs, which is what the preprocessing
    estimators consume, and returns parallel lists.
    """
    volumes, brains = [], []
    for item in X:
        if isinstance(item, VoxelVolume):
            volumes.append(item)
            brains.append(None)
        else:
            try:
                vol, brain = item
            except (TypeError, ValueError):
                raise TypeError(
                    "X items must be VoxelVolume or (volume, brain_mask) pairs, "
                    f"got {type(item).__name__}"
                ) from None
            volumes.append(check_volume(vol))
            brains.append(None if brain is None else check_mask(brain, name="brain_mask"))
    return volumes, brains


def is_paired(X) -> bool:
    return any(not isinstance(item, VoxelVolume) for item in X)

"""Intensity and geometry normalization ahead of feature extraction.

Functional core plus sklearn-compatible transformers.  The transformers
accept either a list of :class:`VoxelVolume` or a list of
``(volume, brain_mask)`` pairs and preserve the structure they were given,
so the three of them compose in an sklearn ``Pipeline``:

    Pipeline([("rescale", VolumeRescaler((256, 256))),
              ("window", WindowLevelNormalizer(0.01, 0.99)),
              ("zscore", ZScoreNormalizer())])
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateInputError, GliomorphError
from .validation import (
    check_fraction_pair,
    check_mask,
    check_volume,
    is_paired,
    split_cases,
)
from .volume import KIND_INTENSITY, KIND_MASK, VoxelVolume


@dataclass
class DatasetStats:
    """Mean and population standard deviation over the brain voxels of a dataset."""

    mean: float
    std: float
    n_voxels: int

    @property
    def degenerate(self) -> bool:
        return self.std == 0.0


def _inplane_coords(n_in: int, n_out: int) -> np.ndarray:
    # output pixel centers mapped into input index space; physical extent is
    # preserved because both grids span the same [0, n*spacing) interval
    return (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5


def rescale_to_reference(v: VoxelVolume, target_inplane: Tuple[int, int]) -> VoxelVolume:
    """Resample every slice in-plane to (ny, nx); z is left untouched.

    Intensity volumes are interpolated bilinearly, masks with nearest
    neighbor so they stay binary.  Spacing is updated so the physical extent
    of each slice is unchanged.
    """
    ny_out, nx_out = (int(t) for t in target_inplane)
    if ny_out <= 0 or nx_out <= 0:
        raise GliomorphError(f"target dims must be positive, got {target_inplane}")
    check_volume(v)
    nz, ny_in, nx_in = v.dims
    yy = _inplane_coords(ny_in, ny_out)
    xx = _inplane_coords(nx_in, nx_out)
    grid = np.meshgrid(yy, xx, indexing="ij")
    coords = np.stack([g.ravel() for g in grid])
    order = 1 if v.kind == KIND_INTENSITY else 0
    src = v.data.astype(np.float64, copy=False)
    out = np.empty((nz, ny_out, nx_out), dtype=np.float64)
    for z in range(nz):
        out[z] = ndimage.map_coordinates(
            src[z], coords, order=order, mode="nearest"
        ).reshape(ny_out, nx_out)
    if v.kind == KIND_MASK:
        out = out.astype(np.uint8)
    sz, sy, sx = v.spacing
    spacing = (sz, sy * ny_in / ny_out, sx * nx_in / nx_out)
    return VoxelVolume(data=out, spacing=spacing, kind=v.kind)


def _brain_values(v: VoxelVolume, brain: Optional[VoxelVolume]) -> np.ndarray:
    if brain is None:
        return v.data.reshape(-1)
    check_mask(brain, name="brain_mask")
    if brain.dims != v.dims:
        raise GliomorphError(f"brain mask dims {brain.dims} do not match volume {v.dims}")
    return v.data[brain.data != 0]


def window_level_normalize(v: VoxelVolume, brain: Optional[VoxelVolume] = None,
                           p_low: float = 0.01, p_high: float = 0.99) -> VoxelVolume:
    """Clip to the [p_low, p_high] quantiles of the brain-voxel histogram and
    map affinely onto [0, 1].

    Quantiles use linear interpolation between order statistics.  When no
    brain mask is given the histogram is taken over the whole volume.
    """
    check_volume(v, kind=KIND_INTENSITY)
    p_low, p_high = check_fraction_pair(p_low, p_high)
    values = _brain_values(v, brain)
    if values.size == 0:
        raise DegenerateInputError("no brain voxels to take the histogram over")
    q_low, q_high = np.quantile(values.astype(np.float64), [p_low, p_high], method="linear")
    if q_high == q_low:
        raise DegenerateInputError(
            f"degenerate histogram: low and high quantiles coincide at {q_low}"
        )
    data = np.clip(v.data.astype(np.float64), q_low, q_high)
    data = (data - q_low) / (q_high - q_low)
    return v.with_data(data)


class MomentAccumulator:
    """Streaming mean/variance over brain voxels, one volume at a time.

    Per-volume moments are combined in arrival order (Chan's update), so the
    reduction is deterministic and matches a flat concatenation to floating
    tolerance.
    """

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, v: VoxelVolume, brain: Optional[VoxelVolume] = None) -> None:
        check_volume(v)
        values = _brain_values(v, brain).astype(np.float64)
        if values.size == 0:
            return
        part = MomentAccumulator()
        part.n = values.size
        part.mean = float(values.mean())
        part.m2 = float(((values - part.mean) ** 2).sum())
        self.add_moments(part)

    def add_moments(self, other: "MomentAccumulator") -> None:
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return
        combined = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / combined
        self.m2 += other.m2 + delta * delta * self.n * other.n / combined
        self.n = combined

    def finish(self) -> DatasetStats:
        if self.n == 0:
            raise DegenerateInputError("dataset stats: zero brain voxels in total")
        return DatasetStats(mean=self.mean, std=float(np.sqrt(self.m2 / self.n)),
                            n_voxels=self.n)


def compute_dataset_stats(volumes: Sequence[VoxelVolume],
                          brains: Optional[Sequence[Optional[VoxelVolume]]] = None) -> DatasetStats:
    """Mean and population std over the union of brain voxels of all volumes."""
    if len(volumes) == 0:
        raise GliomorphError("need at least one volume")
    if brains is None:
        brains = [None] * len(volumes)
    if len(brains) != len(volumes):
        raise GliomorphError("volumes and brains must have equal length")
    acc = MomentAccumulator()
    for v, brain in zip(volumes, brains):
        acc.add(v, brain)
    return acc.finish()


def zscore(v: VoxelVolume, stats: DatasetStats) -> VoxelVolume:
    """Map every voxel to (x - mean) / std."""
    check_volume(v, kind=KIND_INTENSITY)
    if stats.std <= 0:
        raise DegenerateInputError("zscore requires std > 0 (degenerate dataset stats)")
    return v.with_data((v.data.astype(np.float64) - stats.mean) / stats.std)


def _map_items(X, vol_fn, mask_fn):
    paired = is_paired(X)
    volumes, brains = split_cases(X)
    out = []
    for vol, brain in zip(volumes, brains):
        new_vol = vol_fn(vol, brain)
        if paired:
            out.append((new_vol, None if brain is None else mask_fn(brain)))
        else:
            out.append(new_vol)
    return out


class VolumeRescaler(TransformerMixin, BaseEstimator):
    """Stateless transformer resampling volumes (and paired masks) in-plane."""

    def __init__(self, target_inplane=(256, 256)):
        self.target_inplane = target_inplane

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        target = self.target_inplane
        return _map_items(
            X,
            lambda v, b: rescale_to_reference(v, target),
            lambda m: rescale_to_reference(m, target),
        )


class WindowLevelNormalizer(TransformerMixin, BaseEstimator):
    """Per-volume adaptive window/level normalization onto [0, 1]."""

    def __init__(self, p_low=0.01, p_high=0.99):
        self.p_low = p_low
        self.p_high = p_high

    def fit(self, X, y=None):
        check_fraction_pair(self.p_low, self.p_high)
        return self

    def transform(self, X):
        return _map_items(
            X,
            lambda v, b: window_level_normalize(v, b, self.p_low, self.p_high),
            lambda m: m,
        )


class ZScoreNormalizer(TransformerMixin, BaseEstimator):
    """Dataset-level z-scoring: fit learns mean/std, transform applies them."""

    def fit(self, X, y=None):
        volumes, brains = split_cases(X)
        stats = compute_dataset_stats(volumes, brains)
        self.stats_ = stats
        self.mean_ = stats.mean
        self.std_ = stats.std
        return self

    def transform(self, X):
        check_is_fitted(self, "stats_")
        stats = self.stats_
        return _map_items(X, lambda v, b: zscore(v, stats), lambda m: m)

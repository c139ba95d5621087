"""The three predictive tumor shape features: ASD, BEVR and MF.

Angular standard deviation (ASD): mean over ten 36-degree angular bins of
the per-bin population standard deviation of mean-normalized radial boundary
distances, on one slice.

Bounding ellipsoid volume ratio (BEVR): tumor volume divided by the volume
of the minimum enclosing ellipsoid of the tumor surface, in 3D.

Margin fluctuation (MF): population standard deviation of the residual
between the radial-distance signal (in contour order) and its circular
moving average with window length 10% of the perimeter.

Every operation first crops its mask to the foreground bounding box, which
makes feature values bit-identical under integer-voxel translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .contours import RadialProfile, normalized_radial_distances, trace_boundary
from .ellipsoid import Ellipsoid, min_bounding_ellipsoid
from .errors import (
    DegenerateGeometryError,
    DegenerateInputError,
    GliomorphError,
    InsufficientBoundaryError,
)
from .validation import check_nonempty_mask, check_slice_mask
from .volume import VoxelVolume

N_ANGULAR_BINS = 10

SLICE_POLICIES = ("max_area_slice", "mean_over_slices")

#: slice_used value reported by the mean-over-slices policy
SLICE_USED_MEAN = -1


@dataclass
class ShapeFeatureRecord:
    case_id: str
    asd: float
    bevr: float
    mf: float
    slice_used: int
    tumor_voxels: int


def _crop_to_bbox(arr: np.ndarray) -> Tuple[np.ndarray, Tuple[int, ...]]:
    idx = np.argwhere(arr)
    lo = idx.min(axis=0)
    hi = idx.max(axis=0) + 1
    slices = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
    return arr[slices], tuple(int(a) for a in lo)


def _slice_profile(slice_mask: np.ndarray) -> RadialProfile:
    contour = trace_boundary(slice_mask)
    if len(contour.points) < N_ANGULAR_BINS:
        raise InsufficientBoundaryError(
            f"slice has {len(contour.points)} boundary pixels, "
            f"need at least {N_ANGULAR_BINS}"
        )
    return normalized_radial_distances(contour)


def asd_from_profile(profile: RadialProfile) -> float:
    """Mean over nonempty 36-degree bins of the per-bin population std."""
    width = 2.0 * np.pi / N_ANGULAR_BINS
    bins = np.minimum((profile.angles / width).astype(np.intp), N_ANGULAR_BINS - 1)
    stds = [
        float(np.std(profile.distances[bins == b]))
        for b in range(N_ANGULAR_BINS)
        if np.any(bins == b)
    ]
    return float(np.mean(stds))


def smoothing_window(n_points: int, fraction: float = 0.10) -> int:
    """Moving-average length: round(fraction * n) half-up, minimum 1, odd."""
    w = max(1, int(np.floor(fraction * n_points + 0.5)))
    if w % 2 == 0:
        w += 1
    return w


def mf_from_signal(distances: np.ndarray, window: Optional[int] = None) -> float:
    """Population std of (signal - circular moving average of the signal)."""
    d = np.asarray(distances, dtype=np.float64)
    w = smoothing_window(len(d)) if window is None else int(window)
    if w <= 1:
        return 0.0
    half = w // 2
    padded = np.concatenate([d[-half:], d, d[:half]])
    smoothed = np.convolve(padded, np.full(w, 1.0 / w), mode="valid")
    return float(np.std(d - smoothed))


def angular_standard_deviation(slice_mask) -> float:
    """ASD of one slice; requires at least 10 boundary pixels."""
    mask = check_slice_mask(slice_mask)
    if not mask.any():
        raise DegenerateInputError("empty slice")
    cropped, _ = _crop_to_bbox(mask)
    return asd_from_profile(_slice_profile(cropped))


def margin_fluctuation(slice_mask) -> float:
    """MF of one slice; requires at least 10 boundary pixels."""
    mask = check_slice_mask(slice_mask)
    if not mask.any():
        raise DegenerateInputError("empty slice")
    cropped, _ = _crop_to_bbox(mask)
    profile = _slice_profile(cropped)
    return mf_from_signal(profile.distances)


def boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """Indices (n, 3) of foreground voxels with a 6-neighbor background voxel;
    everything outside the array counts as background."""
    m = mask.astype(bool)
    interior = np.zeros_like(m)
    if min(m.shape) > 2:
        interior[1:-1, 1:-1, 1:-1] = (
            m[1:-1, 1:-1, 1:-1]
            & m[:-2, 1:-1, 1:-1] & m[2:, 1:-1, 1:-1]
            & m[1:-1, :-2, 1:-1] & m[1:-1, 2:, 1:-1]
            & m[1:-1, 1:-1, :-2] & m[1:-1, 1:-1, 2:]
        )
    return np.argwhere(m & ~interior)


def _surface_points(mask: np.ndarray, spacing, source: str) -> np.ndarray:
    idx = boundary_voxels(mask).astype(np.float64)
    spacing = np.asarray(spacing, dtype=np.float64)
    if source == "centers":
        return (idx + 0.5) * spacing
    if source == "corners":
        offsets = np.array(
            [[dz, dy, dx] for dz in (0.0, 1.0) for dy in (0.0, 1.0) for dx in (0.0, 1.0)]
        )
        corners = (idx[:, None, :] + offsets[None, :, :]).reshape(-1, 3) * spacing
        return np.unique(corners, axis=0)
    raise GliomorphError(f"unknown point source {source!r}")


def tumor_ellipsoid(mask3d: VoxelVolume, tolerance: float = 1e-6,
                    point_source: str = "centers") -> Ellipsoid:
    """Minimum enclosing ellipsoid of the tumor surface.

    ``point_source="centers"`` fits the boundary voxel centers and falls back
    to the 8 corner points per boundary voxel when the centers are rank
    deficient (single-slice or line-like tumors); ``"corners"`` fits corners
    directly, which guarantees the voxelized solid is contained.
    """
    check_nonempty_mask(mask3d)
    cropped, _ = _crop_to_bbox(mask3d.data)
    if point_source == "centers":
        try:
            return min_bounding_ellipsoid(
                _surface_points(cropped, mask3d.spacing, "centers"), tolerance
            )
        except DegenerateGeometryError:
            pass  # corner points span the voxel extent and are full rank
    return min_bounding_ellipsoid(
        _surface_points(cropped, mask3d.spacing, "corners"), tolerance
    )


def bounding_ellipsoid_volume_ratio(mask3d: VoxelVolume, tolerance: float = 1e-6,
                                    point_source: str = "centers") -> float:
    """Tumor volume over minimum-enclosing-ellipsoid volume, clamped to (0, 1]."""
    check_nonempty_mask(mask3d)
    tumor_volume = mask3d.foreground_count() * mask3d.voxel_volume_mm3
    ell = tumor_ellipsoid(mask3d, tolerance=tolerance, point_source=point_source)
    return min(tumor_volume / ell.volume, 1.0)


def _slice_areas(mask: np.ndarray) -> np.ndarray:
    return mask.reshape(mask.shape[0], -1).sum(axis=1)


def representative_slice(mask3d: VoxelVolume) -> int:
    """Index of the slice with the most tumor pixels (smallest z on ties)."""
    check_nonempty_mask(mask3d)
    return int(np.argmax(_slice_areas(np.asarray(mask3d.data))))


def extract_features(mask3d: VoxelVolume, case_id: str = "",
                     policy: str = "max_area_slice",
                     tolerance: float = 1e-6,
                     point_source: str = "centers") -> ShapeFeatureRecord:
    """ASD, BEVR and MF of a post-processed tumor mask.

    BEVR always comes from the full 3D mask.  The per-slice features come
    from the representative slice chosen by ``policy``:
    ``"max_area_slice"`` (default) uses the slice with the most tumor pixels,
    ``"mean_over_slices"`` averages over all slices with enough boundary
    pixels and reports ``slice_used = -1``.
    """
    if policy not in SLICE_POLICIES:
        raise GliomorphError(f"unknown slice policy {policy!r}, expected {SLICE_POLICIES}")
    check_nonempty_mask(mask3d)
    cropped, offset = _crop_to_bbox(np.asarray(mask3d.data))
    bevr = bounding_ellipsoid_volume_ratio(
        mask3d.with_data(cropped), tolerance=tolerance, point_source=point_source
    )
    if policy == "max_area_slice":
        z_local = int(np.argmax(_slice_areas(cropped)))
        profile = _slice_profile(cropped[z_local])
        asd = asd_from_profile(profile)
        mf = mf_from_signal(profile.distances)
        slice_used = z_local + offset[0]
    else:
        asds, mfs = [], []
        for z in range(cropped.shape[0]):
            if not cropped[z].any():
                continue
            try:
                profile = _slice_profile(cropped[z])
            except InsufficientBoundaryError:
                continue
            asds.append(asd_from_profile(profile))
            mfs.append(mf_from_signal(profile.distances))
        if not asds:
            raise InsufficientBoundaryError(
                "no slice has enough boundary pixels for the per-slice features"
            )
        asd, mf = float(np.mean(asds)), float(np.mean(mfs))
        slice_used = SLICE_USED_MEAN
    return ShapeFeatureRecord(
        case_id=case_id,
        asd=asd,
        bevr=bevr,
        mf=mf,
        slice_used=slice_used,
        tumor_voxels=mask3d.foreground_count(),
    )


class ShapeFeatureExtractor(TransformerMixin, BaseEstimator):
    """Transformer mapping tumor masks to (n_cases, 3) feature arrays.

    Columns are (asd, bevr, mf); see :func:`extract_features` for the
    parameters.
    """

    def __init__(self, policy="max_area_slice", tolerance=1e-6, point_source="centers"):
        self.policy = policy
        self.tolerance = tolerance
        self.point_source = point_source

    def fit(self, X, y=None):
        if self.policy not in SLICE_POLICIES:
            raise GliomorphError(f"unknown slice policy {self.policy!r}")
        return self

    def transform(self, X):
        records = self.extract_records(X)
        return np.array([[r.asd, r.bevr, r.mf] for r in records], dtype=np.float64)

    def extract_records(self, X, case_ids: Optional[Sequence[str]] = None) -> List[ShapeFeatureRecord]:
        if case_ids is None:
            case_ids = [str(i) for i in range(len(X))]
        return [
            extract_features(
                mask, case_id=cid, policy=self.policy,
                tolerance=self.tolerance, point_source=self.point_source,
            )
            for mask, cid in zip(X, case_ids)
        ]

    def get_feature_names_out(self, input_features=None):
        return np.array(["asd", "bevr", "mf"], dtype=object)

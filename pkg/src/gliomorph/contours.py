"""Boundary tracing and radial profiles of 2D tumor slices.

The outer boundary is traced with Moore neighbor following, so consecutive
contour points are 8-neighbors and every point is a tumor pixel touching
background through a 4-neighbor.  The radial profile measures each boundary
pixel's distance to the centroid of all tumor pixels, normalized to mean one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError
from .validation import check_slice_mask

_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# Moore neighborhood in clockwise order starting west: W NW N NE E SE S SW
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


@dataclass
class BoundaryContour:
    """Closed outer boundary of the largest tumor region in one slice.

    ``points`` is an (n, 2) integer array of (y, x) pixel coordinates in
    traversal order; the last point is an 8-neighbor of the first.  The
    traversal is oriented counterclockwise when plotted with the y axis up.
    ``centroid`` is the mean coordinate of all tumor pixels in the region,
    not only the boundary ones.
    """

    points: np.ndarray
    centroid: Tuple[float, float]


@dataclass
class RadialProfile:
    """Per-boundary-pixel (angle, normalized distance) about the centroid.

    Angles are atan2(dy, dx) folded into [0, 2pi).  Distances are divided by
    their mean, so mean(distances) == 1 unless the profile is degenerate
    (single-point contour), in which case distances are all zero.
    """

    angles: np.ndarray
    distances: np.ndarray
    degenerate: bool = False

    def __len__(self) -> int:
        return len(self.distances)


def _largest_region(mask: np.ndarray) -> np.ndarray:
    labels, k = ndimage.label(mask, structure=_STRUCTURE_4)
    if k <= 1:
        return mask.astype(bool)
    sizes = np.bincount(labels.reshape(-1))[1:]
    return labels == (1 + int(np.argmax(sizes)))


def _signed_area(points: np.ndarray) -> float:
    # shoelace in (x, -y): positive means counterclockwise with y plotted up
    y = -points[:, 0].astype(np.float64)
    x = points[:, 1].astype(np.float64)
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

def trace_boundary(slice_mask) -> BoundaryContour:
    """Trace the outer boundary of the slice's tumor region.

    If the slice holds more than one 4-connected region, the largest one is
    traced (earliest in raster order on ties).  Raises DegenerateInputError
    on an empty slice.
    """
    mask = check_slice_mask(slice_mask)
    if not mask.any():
        raise DegenerateInputError("cannot trace the boundary of an empty slice")
    region = _largest_region(mask)
    pixels = np.argwhere(region)
    n = len(pixels)
    centroid = (float(pixels[:, 0].mean()), float(pixels[:, 1].mean()))
    start = (int(pixels[0, 0]), int(pixels[0, 1]))  # argwhere is raster ordered
    if n == 1:
        return BoundaryContour(points=np.array([start]), centroid=centroid)

    h, w = region.shape

    def fg(p):
        return 0 <= p[0] < h and 0 <= p[1] < w and region[p]

    start_back = (start[0], start[1] - 1)  # west of start is background by scan order
    points = [start]
    cur, back = start, start_back
    budget = 8 * n + 8
    while budget > 0:
        budget -= 1
        d = (back[0] - cur[0], back[1] - cur[1])
        i = _MOORE_INDEX[d]
        nxt = None
        back_cand = back  # backtrack stays put if the very next neighbor is foreground
        for step in range(1, 9):
            dy, dx = _MOORE[(i + step) % 8]
            cand = (cur[0] + dy, cur[1] + dx)
            if fg(cand):
                nxt = cand
                break
            back_cand = cand
        if nxt is None:  # isolated pixel, handled above; defensive
            break
        if nxt == start and back_cand == start_back:
            break  # Jacob's criterion: re-entering the start the same way
        points.append(nxt)
        cur, back = nxt, back_cand
    pts = np.array(points, dtype=np.intp)
    if len(pts) >= 3 and _signed_area(pts) < 0:
        pts = pts[::-1]
    return BoundaryContour(points=pts, centroid=centroid)


def normalized_radial_distances(contour: BoundaryContour) -> RadialProfile:
    """Angles and mean-normalized centroid distances of the contour points."""
    pts = np.asarray(contour.points, dtype=np.float64)
    if len(pts) == 0:
        raise DegenerateInputError("empty contour")
    cy, cx = contour.centroid
    dy = pts[:, 0] - cy
    dx = pts[:, 1] - cx
    angles = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    dist = np.hypot(dy, dx)
    mean = dist.mean()
    if mean == 0.0:
        return RadialProfile(angles=angles, distances=np.zeros_like(dist), degenerate=True)
    return RadialProfile(angles=angles, distances=dist / mean, degenerate=False)


def radial_profile_of_points(points, centroid=None) -> RadialProfile:
    """Radial profile of an arbitrary real-valued (y, x) point sequence.

    Entry point for continuous-geometry contours that never touched a pixel
    grid; ``centroid`` defaults to the mean of the points themselves.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInputError(f"points must be (n, 2), got {pts.shape}")
    if centroid is None:
        centroid = (float(pts[:, 0].mean()), float(pts[:, 1].mean()))
    return normalized_radial_distances(BoundaryContour(points=pts, centroid=centroid))

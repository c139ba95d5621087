"""3D connected components under 6-connectivity and false-positive removal.

Voxels are neighbors only along the primary axes.  Label ids follow the
order in which each component's first voxel appears in a z-major scan, which
pins down the tie-break when equally sized components compete for "largest".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_mask
from .volume import VoxelVolume

#: 6-connectivity structuring element (primary axes only).
STRUCTURE_6 = ndimage.generate_binary_structure(3, 1)


@dataclass
class ComponentLabeling:
    """Partition of a mask's foreground into 6-connected components.

    ``labels`` holds 0 for background and 1..k for components, numbered by
    first voxel encountered in z-major scan order; ``sizes[i]`` is the voxel
    count of label ``i + 1``.
    """

    labels: np.ndarray
    sizes: List[int]

    @property
    def n_components(self) -> int:
        return len(self.sizes)


def _renumber_by_first_voxel(labels: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return labels
    flat = labels.reshape(-1)
    nonzero = np.flatnonzero(flat)
    # first flat index at which each label occurs, in z-major order
    values, first = np.unique(flat[nonzero], return_index=True)
    order = values[np.argsort(first)]
    lut = np.zeros(k + 1, dtype=labels.dtype)
    lut[order] = np.arange(1, k + 1)
    return lut[labels]


def label_components_6(mask: VoxelVolume) -> ComponentLabeling:
    """Label the 6-connected components of a binary mask volume."""
    check_mask(mask)
    raw, k = ndimage.label(mask.data, structure=STRUCTURE_6)
    labels = _renumber_by_first_voxel(raw.astype(np.int32), k)
    sizes = np.bincount(labels.reshape(-1), minlength=k + 1)[1:]
    return ComponentLabeling(labels=labels, sizes=[int(s) for s in sizes])


def keep_largest_component(mask: VoxelVolume) -> VoxelVolume:
    """Keep only the largest 6-connected component of the mask.

    An empty mask is returned unchanged.  Ties are broken toward the
    component whose first voxel comes earliest in z-major scan order, i.e.
    the smallest label id.
    """
    check_mask(mask)
    labeling = label_components_6(mask)
    if labeling.n_components == 0:
        return mask.with_data(np.zeros(mask.dims, dtype=np.uint8))
    winner = 1 + int(np.argmax(labeling.sizes))  # argmax takes the first maximum
    return mask.with_data((labeling.labels == winner).astype(np.uint8))


class LargestComponentFilter(TransformerMixin, BaseEstimator):
    """Stateless transformer applying keep_largest_component to each mask."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [keep_largest_component(m) for m in X]

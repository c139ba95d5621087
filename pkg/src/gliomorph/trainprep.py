"""Deterministic training-set construction: slice filtering, tumor-slice
oversampling with rotation/scale augmentation, and input-channel assembly.

Every tumor slice appears three times in the plan (identity, one random
rotation of 5 to 15 degrees, one random scale of 4 to 8 percent); non-tumor
slices appear once.  All parameters are drawn from a Philox stream keyed by
(seed, case_id, z), so regenerating a plan with the same seed and manifest is
byte-identical, and per-case parallel generation equals sequential.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import ndimage

from ._rng import derive_rng
from .errors import GliomorphError
from .manifest import CaseManifest, CaseRecord, SEQUENCE_NAMES
from .volume import VoxelVolume, load_volume

ROTATE_DEGREES = (5.0, 15.0)
SCALE_FACTORS = (1.04, 1.08)

CHANNEL_MODES = ("auto", "flair_neighbors", "per_sequence")


@dataclass(frozen=True)
class Transform:
    type: str  # "identity", "rotate" or "scale"
    angle_deg: Optional[float] = None
    factor: Optional[float] = None

    def __post_init__(self):
        if self.type == "rotate":
            if self.angle_deg is None or not (
                ROTATE_DEGREES[0] <= abs(self.angle_deg) <= ROTATE_DEGREES[1]
            ):
                raise GliomorphError(
                    f"rotation magnitude must lie in {ROTATE_DEGREES}, got {self.angle_deg}"
                )
        elif self.type == "scale":
            mag = None if self.factor is None or self.factor <= 0 else max(
                self.factor, 1.0 / self.factor
            )
            if mag is None or not (SCALE_FACTORS[0] <= mag <= SCALE_FACTORS[1]):
                raise GliomorphError(
                    f"scale magnitude must lie in {SCALE_FACTORS}, got {self.factor}"
                )
        elif self.type != "identity":
            raise GliomorphError(f"unknown transform type {self.type!r}")


IDENTITY = Transform(type="identity")


@dataclass
class SlicePlanEntry:
    case_id: str
    z: int
    transform: Transform
    channels: List[Tuple[str, int]]  # exactly 3 (sequence, z offset) pairs

    def __post_init__(self):
        if len(self.channels) != 3:
            raise GliomorphError(f"channels must have exactly 3 entries, got {len(self.channels)}")


@dataclass
class AugmentationPlan:
    entries: List[SlicePlanEntry]
    seed: int
    channel_mode: str = "auto"

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "channel_mode": self.channel_mode,
            "entries": [
                {
                    "case_id": e.case_id,
                    "z": e.z,
                    "transform": _transform_doc(e.transform),
                    "channels": [[name, dz] for name, dz in e.channels],
                }
                for e in self.entries
            ],
        }
        return json.dumps(doc, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AugmentationPlan":
        doc = json.loads(text)
        entries = [
            SlicePlanEntry(
                case_id=e["case_id"],
                z=int(e["z"]),
                transform=Transform(**e["transform"]),
                channels=[(name, int(dz)) for name, dz in e["channels"]],
            )
            for e in doc["entries"]
        ]
        return cls(entries=entries, seed=int(doc["seed"]),
                   channel_mode=doc.get("channel_mode", "auto"))


def _transform_doc(t: Transform) -> dict:
    if t.type == "rotate":
        return {"type": "rotate", "angle_deg": t.angle_deg}
    if t.type == "scale":
        return {"type": "scale", "factor": t.factor}
    return {"type": "identity"}


def nonempty_slice_indices(reference: VoxelVolume,
                           brain: Optional[VoxelVolume] = None) -> List[int]:
    """Slice indices that contain brain (or any nonzero intensity when no
    brain mask is available)."""
    source = brain if brain is not None else reference
    flat = np.asarray(source.data).reshape(source.dims[0], -1)
    return [int(z) for z in np.flatnonzero((flat != 0).any(axis=1))]


def filter_empty_slices(case: CaseRecord) -> List[int]:
    """Indices of slices worth training on for this case."""
    flair = load_volume(case.sequences["flair"])
    brain = load_volume(case.brain_mask) if case.brain_mask is not None else None
    return nonempty_slice_indices(flair, brain)


def channel_layout(available: Sequence[str], z: int, nz: int,
                   mode: str = "auto") -> List[Tuple[str, int]]:
    """The 3 input channels for slice z.

    Full-sequence cases use (pre_contrast, flair, post_contrast) at offset 0.
    Otherwise the missing outer channels are filled with the neighboring
    FLAIR slices; at the volume edges the neighbor offset clamps to 0.
    ``mode="flair_neighbors"`` replaces both outer channels whenever any
    sequence is missing; ``mode="per_sequence"`` substitutes only the missing
    ones.
    """
    if mode not in CHANNEL_MODES:
        raise GliomorphError(f"unknown channel mode {mode!r}, expected {CHANNEL_MODES}")
    if not (0 <= z < nz):
        raise GliomorphError(f"slice index {z} outside volume of {nz} slices")
    available = set(available)
    if "flair" not in available:
        raise GliomorphError("flair sequence is required for channel assembly")
    full = all(name in available for name in SEQUENCE_NAMES)
    dz_lo = -1 if z > 0 else 0
    dz_hi = 1 if z < nz - 1 else 0
    if full:
        return [("pre_contrast", 0), ("flair", 0), ("post_contrast", 0)]
    if mode == "per_sequence":
        first = ("pre_contrast", 0) if "pre_contrast" in available else ("flair", dz_lo)
        third = ("post_contrast", 0) if "post_contrast" in available else ("flair", dz_hi)
        return [first, ("flair", 0), third]
    return [("flair", dz_lo), ("flair", 0), ("flair", dz_hi)]


def assemble_channels(case: CaseRecord, z: int, nz: Optional[int] = None,
                      mode: str = "auto") -> List[Tuple[str, int]]:
    """Channel layout for one slice of a case (reads nz from the flair header
    when not supplied)."""
    if nz is None:
        from .volume import read_volume_header

        dims, _, _ = read_volume_header(case.sequences["flair"])
        nz = dims[0]
    return channel_layout(list(case.sequences), z, nz, mode=mode)


def _draw_transforms(seed: int, case_id: str, z: int) -> Tuple[Transform, Transform]:
    rng = derive_rng(seed, "trainprep", case_id, z)
    angle = float(rng.uniform(*ROTATE_DEGREES))
    if int(rng.integers(2)):
        angle = -angle
    factor = float(rng.uniform(*SCALE_FACTORS))
    if int(rng.integers(2)):
        factor = 1.0 / factor
    return Transform(type="rotate", angle_deg=angle), Transform(type="scale", factor=factor)


def plan_case_oversampling(case_id: str, kept: Sequence[int], tumor_slices: Set[int],
                           seed: int, channels_by_z: Dict[int, List[Tuple[str, int]]]) -> List[SlicePlanEntry]:
    entries = []
    for z in kept:
        channels = channels_by_z[z]
        entries.append(SlicePlanEntry(case_id=case_id, z=int(z),
                                      transform=IDENTITY, channels=channels))
        if z in tumor_slices:
            rotate, scale = _draw_transforms(seed, case_id, int(z))
            entries.append(SlicePlanEntry(case_id=case_id, z=int(z),
                                          transform=rotate, channels=channels))
            entries.append(SlicePlanEntry(case_id=case_id, z=int(z),
                                          transform=scale, channels=channels))
    return entries


def plan_oversampling(case: CaseRecord, kept: Sequence[int], seed: int,
                      channel_mode: str = "auto") -> AugmentationPlan:
    """Oversampling plan for one case: three instances of each tumor slice
    (identity + rotation + scale), one instance of each other kept slice."""
    if case.tumor_mask is None:
        raise GliomorphError(f"case {case.case_id}: tumor mask required for oversampling")
    tumor = load_volume(case.tumor_mask)
    nz = tumor.dims[0]
    tumor_slices = set(nonempty_slice_indices(tumor))
    channels_by_z = {
        int(z): channel_layout(list(case.sequences), int(z), nz, mode=channel_mode)
        for z in kept
    }
    entries = plan_case_oversampling(case.case_id, kept, tumor_slices, seed, channels_by_z)
    return AugmentationPlan(entries=entries, seed=int(seed), channel_mode=channel_mode)


def build_plan(manifest: CaseManifest, seed: int, channel_mode: str = "auto") -> AugmentationPlan:
    """Whole-manifest oversampling plan; cases are processed in case_id order
    so permuting manifest rows cannot change the plan."""
    entries = []
    for case in sorted(manifest.cases, key=lambda c: c.case_id):
        kept = filter_empty_slices(case)
        plan = plan_oversampling(case, kept, seed, channel_mode=channel_mode)
        entries.extend(plan.entries)
    return AugmentationPlan(entries=entries, seed=int(seed), channel_mode=channel_mode)


def apply_transform(slice2d, transform: Transform, is_mask: bool = False) -> np.ndarray:
    """Apply a plan transform to one slice.

    Rotation and scaling act about the slice center; intensity slices are
    resampled bilinearly and masks with nearest neighbor; samples falling
    outside the input are 0.  Output dims equal input dims.  The identity
    transform returns a bitwise-equal copy.
    """
    arr = np.asarray(slice2d, dtype=np.float64)
    if arr.ndim != 2:
        raise GliomorphError(f"expected a 2D slice, got shape {arr.shape}")
    if transform.type == "identity":
        return arr.copy()
    h, w = arr.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    dy, dx = yy - cy, xx - cx
    if transform.type == "rotate":
        theta = np.deg2rad(transform.angle_deg)
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        src_y = cy + cos_t * dy + sin_t * dx
        src_x = cx - sin_t * dy + cos_t * dx
    else:
        src_y = cy + dy / transform.factor
        src_x = cx + dx / transform.factor
    order = 0 if is_mask else 1
    out = ndimage.map_coordinates(arr, [src_y.ravel(), src_x.ravel()],
                                  order=order, mode="constant", cval=0.0)
    return out.reshape(h, w)

"""Synthetic phantom volumes for tests and demos.

Shape builders are pure functions of their arguments; the dataset generator
derives everything from one root seed, so two runs with the same seed write
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from ._rng import derive_rng
from .errors import GliomorphError
from .manifest import CaseManifest, CaseRecord, SUBTYPE_SCHEMES, save_manifest
from .volume import KIND_INTENSITY, KIND_MASK, VoxelVolume, write_volume


def ball_mask(shape: Tuple[int, int, int], center, radius: float) -> np.ndarray:
    """Voxel centers within ``radius`` of ``center`` (indices as coordinates)."""
    zz, yy, xx = np.ogrid[: shape[0], : shape[1], : shape[2]]
    cz, cy, cx = center
    d2 = (zz - cz) ** 2 + (yy - cy) ** 2 + (xx - cx) ** 2
    return (d2 <= radius**2).astype(np.uint8)


def ellipsoid_mask(shape: Tuple[int, int, int], center, semi_axes) -> np.ndarray:
    zz, yy, xx = np.ogrid[: shape[0], : shape[1], : shape[2]]
    cz, cy, cx = center
    az, ay, ax = semi_axes
    q = ((zz - cz) / az) ** 2 + ((yy - cy) / ay) ** 2 + ((xx - cx) / ax) ** 2
    return (q <= 1.0).astype(np.uint8)


def disk_mask(shape: Tuple[int, int], center, radius: float) -> np.ndarray:
    yy, xx = np.ogrid[: shape[0], : shape[1]]
    cy, cx = center
    return ((yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2).astype(np.uint8)


def star_mask(shape: Tuple[int, int], center, base_radius: float,
              amplitude: float = 0.25, n_points: int = 10) -> np.ndarray:
    """Star-shaped slice: radius modulated as r0 * (1 + amplitude cos(k theta))."""
    yy, xx = np.mgrid[: shape[0], : shape[1]].astype(np.float64)
    cy, cx = center
    dy, dx = yy - cy, xx - cx
    theta = np.arctan2(dy, dx)
    limit = base_radius * (1.0 + amplitude * np.cos(n_points * theta))
    return (np.hypot(dy, dx) <= limit).astype(np.uint8)


def star_prism_mask(shape: Tuple[int, int, int], center, base_radius: float,
                    half_height: int, amplitude: float = 0.25,
                    n_points: int = 10) -> np.ndarray:
    mask = np.zeros(shape, dtype=np.uint8)
    cz = int(round(center[0]))
    star = star_mask(shape[1:], center[1:], base_radius, amplitude, n_points)
    for z in range(max(0, cz - half_height), min(shape[0], cz + half_height + 1)):
        mask[z] = star
    return mask


_SHAPE_KINDS = ("ball", "ellipsoid", "star_prism", "multi_component")


def _tumor_mask(kind: str, shape, rng: np.random.Generator) -> np.ndarray:
    nz, ny, nx = shape
    center = (nz // 2 + int(rng.integers(-2, 3)),
              ny // 2 + int(rng.integers(-4, 5)),
              nx // 2 + int(rng.integers(-4, 5)))
    r = ny / 6.0 + float(rng.uniform(-1.5, 1.5))
    if kind == "ball":
        return ball_mask(shape, center, r)
    if kind == "ellipsoid":
        axes = (max(2.0, nz / 5.0 + float(rng.uniform(-1, 1))),
                r * float(rng.uniform(1.1, 1.4)),
                r * float(rng.uniform(0.6, 0.9)))
        return ellipsoid_mask(shape, center, axes)
    if kind == "star_prism":
        return star_prism_mask(shape, center, r,
                               half_height=max(2, nz // 6),
                               amplitude=float(rng.uniform(0.2, 0.3)),
                               n_points=int(rng.integers(8, 13)))
    if kind == "multi_component":
        main = ball_mask(shape, center, r)
        for _ in range(int(rng.integers(2, 4))):
            # gap > 2 voxels between ball surfaces keeps the satellite a
            # separate 6-connected component
            angle = float(rng.uniform(0.0, 2.0 * np.pi))
            dist = r + float(rng.uniform(4.5, 7.5))
            sat_center = (center[0],
                          center[1] + dist * np.cos(angle),
                          center[2] + dist * np.sin(angle))
            main |= ball_mask(shape, sat_center, float(rng.uniform(1.0, 2.0)))
        return main
    raise GliomorphError(f"unknown phantom kind {kind!r}")


def _speckled(mask: np.ndarray, brain: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A simulated model prediction: the mask plus a few false-positive specks."""
    pred = mask.copy()
    candidates = np.argwhere(brain & ~mask)
    for _ in range(int(rng.integers(1, 4))):
        z, y, x = candidates[int(rng.integers(len(candidates)))]
        speck = ball_mask(mask.shape, (int(z), int(y), int(x)), float(rng.uniform(1.0, 2.0)))
        pred |= speck & brain
    return pred


def _intensity(brain: np.ndarray, tumor: np.ndarray, rng: np.random.Generator,
               gain: float) -> np.ndarray:
    shape = brain.shape
    img = rng.normal(8.0, 2.0, size=shape)
    img[brain.astype(bool)] += rng.normal(90.0, 8.0, size=int(brain.sum()))
    img[tumor.astype(bool)] += 60.0
    return np.clip(img * gain, 0.0, None).astype(np.float32)


def generate_phantoms(out_dir, seed: int, n_cases: int = 8,
                      size: int = 64) -> Path:
    """Write a synthetic dataset and return the manifest path.

    Cases cycle through ball, ellipsoid, star-prism and multi-component
    tumors inside an ellipsoidal "brain".  One case carries only the FLAIR
    sequence and one case has no genomic labels, so the downstream selection
    logic gets exercised.  Prediction masks with speckle false positives are
    written under ``predictions/``.
    """
    if n_cases < 4:
        raise GliomorphError("need at least 4 phantom cases")
    out = Path(out_dir)
    (out / "volumes").mkdir(parents=True, exist_ok=True)
    (out / "predictions").mkdir(parents=True, exist_ok=True)
    nz = max(16, size // 2)
    shape = (nz, size, size)
    spacing = (1.5, 1.0, 1.0)
    brain = ellipsoid_mask(shape, (nz / 2.0, size / 2.0, size / 2.0),
                           (nz / 2.0 - 2.0, size / 2.0 - 4.0, size / 2.0 - 4.0))
    cases = []
    labels_doc: Dict[str, Dict[str, str]] = {}
    for i in range(n_cases):
        case_id = f"phantom_{i:03d}"
        kind = _SHAPE_KINDS[i % len(_SHAPE_KINDS)]
        rng = derive_rng(seed, "phantoms", case_id)
        tumor = _tumor_mask(kind, shape, rng) & brain
        case_dir = out / "volumes" / case_id
        case_dir.mkdir(parents=True, exist_ok=True)

        flair_only = i == 1
        sequences = {}
        for name, gain in (("pre_contrast", 0.9), ("flair", 1.0), ("post_contrast", 1.1)):
            if flair_only and name != "flair":
                continue
            vol = VoxelVolume(_intensity(brain, tumor, rng, gain), spacing, KIND_INTENSITY)
            write_volume(vol, case_dir / f"{name}.gmv")
            sequences[name] = case_dir / f"{name}.gmv"

        write_volume(VoxelVolume(brain, spacing, KIND_MASK), case_dir / "brain_mask.gmv")
        write_volume(VoxelVolume(tumor, spacing, KIND_MASK), case_dir / "tumor_mask.gmv")
        pred = _speckled(tumor, brain.astype(bool), rng)
        write_volume(VoxelVolume(pred, spacing, KIND_MASK),
                     out / "predictions" / f"{case_id}.gmv")

        genomic = {}
        if i != n_cases - 1:  # leave the last case unlabeled
            for scheme, vocab in SUBTYPE_SCHEMES.items():
                genomic[scheme] = vocab[int(rng.integers(len(vocab)))]
            labels_doc[case_id] = genomic
        cases.append(CaseRecord(
            case_id=case_id,
            sequences=sequences,
            brain_mask=case_dir / "brain_mask.gmv",
            tumor_mask=case_dir / "tumor_mask.gmv",
            genomic_labels=genomic,
        ))
    manifest = CaseManifest(cases=cases)
    manifest_path = out / "manifest.json"
    save_manifest(manifest, manifest_path)
    (out / "labels.json").write_text(
        json.dumps(labels_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest_path

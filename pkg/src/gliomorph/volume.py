"""Voxel volume container and the GMVOL1 on-disk format.

A volume file is two text lines followed by a raw payload:

    GMVOL1\\n
    {"dims":[nz,ny,nx],"spacing":[sz,sy,sx],"kind":"intensity","dtype":"float32"}\\n
    <payload: little-endian, z-major then y then x>

Intensity volumes are stored as float32, masks as uint8 restricted to {0, 1}.
The header line is canonical JSON (fixed key order, no whitespace), so writing
a loaded volume back out reproduces the original file byte for byte.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import VolumeFormatError

MAGIC = b"GMVOL1\n"

KIND_INTENSITY = "intensity"
KIND_MASK = "mask"

_KIND_DTYPES = {KIND_INTENSITY: "<f4", KIND_MASK: "<u1"}
_KIND_DTYPE_NAMES = {KIND_INTENSITY: "float32", KIND_MASK: "uint8"}

# Single-band PIL modes accepted by load_slice_stack.
_GRAYSCALE_MODES = {"1", "L", "P", "I", "I;16", "I;16B", "I;16L", "F"}


@dataclass
class VoxelVolume:
    """3D scalar grid with physical spacing.

    Parameters
    ----------
    data : np.ndarray
        Array of shape (nz, ny, nx).
    spacing : tuple of float
        Millimeters per voxel along (z, y, x); all positive.
    kind : str
        ``"intensity"`` for real-valued data, ``"mask"`` for {0, 1} data.
    """

    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    kind: str = KIND_INTENSITY

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise VolumeFormatError(f"volume data must be 3D, got shape {self.data.shape}")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3:
            raise VolumeFormatError(f"spacing must have 3 components, got {self.spacing}")
        if any(s <= 0 for s in self.spacing):
            raise VolumeFormatError(f"spacing components must be positive, got {self.spacing}")
        if self.kind not in _KIND_DTYPES:
            raise VolumeFormatError(f"unknown volume kind {self.kind!r}")
        if self.kind == KIND_MASK:
            values = np.unique(self.data)
            if values.size and not np.isin(values, (0, 1)).all():
                bad = values[~np.isin(values, (0, 1))][:4]
                raise VolumeFormatError(f"mask volume contains values outside {{0,1}}: {bad}")

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.data.shape

    @property
    def voxel_volume_mm3(self) -> float:
        sz, sy, sx = self.spacing
        return sz * sy * sx

    def with_data(self, data: np.ndarray, kind: Optional[str] = None) -> "VoxelVolume":
        return replace(self, data=data, kind=self.kind if kind is None else kind)

    def foreground_count(self) -> int:
        if self.kind != KIND_MASK:
            raise VolumeFormatError("foreground_count is only defined for mask volumes")
        return int(np.count_nonzero(self.data))


def _header_bytes(v: VoxelVolume) -> bytes:
    header = {
        "dims": [int(d) for d in v.dims],
        "spacing": [float(s) for s in v.spacing],
        "kind": v.kind,
        "dtype": _KIND_DTYPE_NAMES[v.kind],
    }
    return json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n"


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    # temp file + rename so parallel writers never expose partial files
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_volume(v: VoxelVolume, path) -> None:
    """Write ``v`` to ``path`` in GMVOL1 format (atomically).

    Intensity data is cast to float32 and masks to uint8; these are the only
    element types of the format.
    """
    payload = np.ascontiguousarray(v.data, dtype=_KIND_DTYPES[v.kind]).tobytes()
    _atomic_write_bytes(Path(path), MAGIC + _header_bytes(v) + payload)


def _parse_header(line: bytes, path) -> Tuple[Tuple[int, int, int], Tuple[float, float, float], str]:
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VolumeFormatError(f"{path}: malformed volume header: {exc}") from exc
    try:
        dims = tuple(int(d) for d in header["dims"])
        spacing = tuple(float(s) for s in header["spacing"])
        kind = header["kind"]
        dtype_name = header["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise VolumeFormatError(f"{path}: volume header missing or invalid field: {exc}") from exc
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise VolumeFormatError(f"{path}: dims must be 3 positive integers, got {dims}")
    if kind not in _KIND_DTYPES:
        raise VolumeFormatError(f"{path}: unknown volume kind {kind!r}")
    if dtype_name != _KIND_DTYPE_NAMES[kind]:
        raise VolumeFormatError(
            f"{path}: element type {dtype_name!r} does not match kind {kind!r} "
            f"(expected {_KIND_DTYPE_NAMES[kind]!r})"
        )
    return dims, spacing, kind  # spacing positivity checked by VoxelVolume


def read_volume_header(path) -> Tuple[Tuple[int, int, int], Tuple[float, float, float], str]:
    """Read (dims, spacing, kind) from a volume file without loading the payload."""
    path = Path(path)
    if not path.is_file():
        raise VolumeFormatError(f"{path}: no such volume file")
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise VolumeFormatError(f"{path}: bad magic, not a GMVOL1 file")
        return _parse_header(fh.readline(), path)


def load_volume(path) -> VoxelVolume:
    """Load and validate a GMVOL1 volume file.

    Raises
    ------
    VolumeFormatError
        Missing file, bad magic or header, payload size not matching the
        declared dims, mask values outside {0, 1}, or non-positive spacing.
    """
    path = Path(path)
    if not path.is_file():
        raise VolumeFormatError(f"{path}: no such volume file")
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise VolumeFormatError(f"{path}: bad magic, not a GMVOL1 file")
        dims, spacing, kind = _parse_header(fh.readline(), path)
        payload = fh.read()
    dtype = np.dtype(_KIND_DTYPES[kind])
    expected = dims[0] * dims[1] * dims[2] * dtype.itemsize
    if len(payload) != expected:
        raise VolumeFormatError(
            f"{path}: payload holds {len(payload)} bytes but header declares "
            f"{expected} ({dims[0]}x{dims[1]}x{dims[2]} {dtype.name})"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return VoxelVolume(data=data, spacing=spacing, kind=kind)


def _read_slice(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode not in _GRAYSCALE_MODES:
                raise VolumeFormatError(
                    f"{path}: unsupported image mode {img.mode!r}, expected a grayscale image"
                )
            return np.asarray(img, dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise VolumeFormatError(f"{path}: unreadable image: {exc}") from exc


def load_slice_stack(directory, spacing: Tuple[float, float, float],
                     kind: str = KIND_INTENSITY) -> VoxelVolume:
    """Stack a directory of grayscale slice images into a volume.

    Slices are ordered along z by ascending lexicographic filename (so
    zero-padded names sort naturally and ``s10`` precedes ``s2``); pixel
    values are converted to reals.

    Parameters
    ----------
    directory : path
        Directory containing one image file per slice.
    spacing : tuple of float
        (sz, sy, sx) in millimeters.
    kind : str
        Kind of the resulting volume; ``"mask"`` additionally requires all
        pixel values to be 0 or 1.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise VolumeFormatError(f"{directory}: not a directory")
    names = sorted(p.name for p in directory.iterdir() if p.is_file())
    if not names:
        raise VolumeFormatError(f"{directory}: no slice images found")
    slices = []
    for name in names:
        arr = _read_slice(directory / name)
        if arr.ndim != 2:
            raise VolumeFormatError(f"{directory / name}: expected a 2D grayscale image")
        if slices and arr.shape != slices[0].shape:
            raise VolumeFormatError(
                f"{directory / name}: slice dimensions {arr.shape} differ from "
                f"first slice {slices[0].shape}"
            )
        slices.append(arr)
    data = np.stack(slices, axis=0)
    return VoxelVolume(data=data, spacing=spacing, kind=kind)

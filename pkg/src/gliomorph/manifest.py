"""Case manifest: which volumes, masks and genomic labels belong to each case.

The manifest is a JSON document; volume paths are resolved relative to the
manifest file's directory.  Validation cross-checks the headers of every
listed volume so that all grids within a case agree, and checks genomic
labels against the fixed subtype vocabularies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .errors import ManifestError, VolumeFormatError
from .volume import read_volume_header

SCHEMA_VERSION = 1

SEQUENCE_NAMES = ("pre_contrast", "flair", "post_contrast")

#: The six molecular classification schemes and their label vocabularies.
SUBTYPE_SCHEMES: Dict[str, tuple] = {
    "IDH_1p19q": ("IDHmut-codel", "IDHmut-noncodel", "IDHwt"),
    "RNASeq": ("R1", "R2", "R3", "R4"),
    "Methylation": ("M1", "M2", "M3", "M4", "M5"),
    "CNC": ("C1", "C2", "C3"),
    "miRNA": ("mi1", "mi2", "mi3", "mi4"),
    "COC": ("coc1", "coc2", "coc3"),
}


@dataclass
class CaseRecord:
    """One patient's volumes, masks and genomic labels."""

    case_id: str
    sequences: Dict[str, Path]
    brain_mask: Optional[Path] = None
    tumor_mask: Optional[Path] = None
    genomic_labels: Dict[str, str] = field(default_factory=dict)

    @property
    def has_all_sequences(self) -> bool:
        return all(name in self.sequences for name in SEQUENCE_NAMES)

    def volume_paths(self) -> List[Path]:
        paths = list(self.sequences.values())
        if self.brain_mask is not None:
            paths.append(self.brain_mask)
        if self.tumor_mask is not None:
            paths.append(self.tumor_mask)
        return paths


@dataclass
class CaseManifest:
    cases: List[CaseRecord]
    schema_version: int = SCHEMA_VERSION

    def case_ids(self) -> List[str]:
        return [c.case_id for c in self.cases]

    def get(self, case_id: str) -> CaseRecord:
        for c in self.cases:
            if c.case_id == case_id:
                return c
        raise KeyError(case_id)


def _validate_case(rec: CaseRecord, check_headers: bool) -> None:
    if not rec.case_id:
        raise ManifestError("case with empty case_id")
    for name in rec.sequences:
        if name not in SEQUENCE_NAMES:
            raise ManifestError(f"case {rec.case_id}: unknown sequence name {name!r}")
    if "flair" not in rec.sequences:
        raise ManifestError(f"case {rec.case_id}: missing required flair sequence")
    for scheme, label in rec.genomic_labels.items():
        if scheme not in SUBTYPE_SCHEMES:
            raise ManifestError(f"case {rec.case_id}: unknown subtype scheme {scheme!r}")
        if label not in SUBTYPE_SCHEMES[scheme]:
            raise ManifestError(
                f"case {rec.case_id}: label {label!r} not in {scheme} vocabulary "
                f"{SUBTYPE_SCHEMES[scheme]}"
            )
    if not check_headers:
        return
    grid = None
    for path in rec.volume_paths():
        try:
            dims, spacing, _ = read_volume_header(path)
        except VolumeFormatError as exc:
            raise ManifestError(f"case {rec.case_id}: {exc}") from exc
        if grid is None:
            grid = (dims, spacing)
        elif (dims, spacing) != grid:
            raise ManifestError(
                f"case {rec.case_id}: {path} has grid {dims}/{spacing}, "
                f"expected {grid[0]}/{grid[1]}"
            )


def validate_manifest(manifest: CaseManifest, check_headers: bool = True) -> None:
    """Raise ManifestError unless the manifest satisfies all invariants.

    Validation is per case plus a duplicate-id check, so the verdict does not
    depend on case order.
    """
    seen = set()
    for rec in manifest.cases:
        if rec.case_id in seen:
            raise ManifestError(f"duplicate case_id {rec.case_id!r}")
        seen.add(rec.case_id)
    for rec in manifest.cases:
        _validate_case(rec, check_headers)


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_manifest(path, check_headers: bool = True) -> CaseManifest:
    """Load and validate a JSON case manifest."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"{path}: cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: malformed manifest JSON: {exc}") from exc
    if not isinstance(doc, dict) or "cases" not in doc:
        raise ManifestError(f"{path}: manifest must be an object with a 'cases' list")
    base = path.parent
    cases = []
    for entry in doc["cases"]:
        if not isinstance(entry, dict) or "case_id" not in entry:
            raise ManifestError(f"{path}: every case needs a case_id")
        sequences = {
            name: _resolve(base, p) for name, p in (entry.get("sequences") or {}).items()
        }
        rec = CaseRecord(
            case_id=str(entry["case_id"]),
            sequences=sequences,
            brain_mask=_resolve(base, entry["brain_mask"]) if entry.get("brain_mask") else None,
            tumor_mask=_resolve(base, entry["tumor_mask"]) if entry.get("tumor_mask") else None,
            genomic_labels=dict(entry.get("genomic_labels") or {}),
        )
        cases.append(rec)
    manifest = CaseManifest(cases=cases, schema_version=int(doc.get("schema_version", SCHEMA_VERSION)))
    validate_manifest(manifest, check_headers=check_headers)
    return manifest


def save_manifest(manifest: CaseManifest, path, relative_to: Optional[Path] = None) -> None:
    """Write a manifest as JSON; paths are stored relative to ``relative_to``
    (default: the manifest's own directory) when possible."""
    path = Path(path)
    base = Path(relative_to) if relative_to is not None else path.parent

    def fmt(p: Optional[Path]):
        if p is None:
            return None
        try:
            return str(Path(p).relative_to(base))
        except ValueError:
            return str(p)

    doc = {
        "schema_version": manifest.schema_version,
        "cases": [
            {
                "case_id": rec.case_id,
                "sequences": {name: fmt(p) for name, p in rec.sequences.items()},
                "brain_mask": fmt(rec.brain_mask),
                "tumor_mask": fmt(rec.tumor_mask),
                "genomic_labels": rec.genomic_labels,
            }
            for rec in manifest.cases
        ],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

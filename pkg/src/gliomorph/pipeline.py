"""End-to-end orchestration: manifest in, association report out.

Stages write their artifacts under the output directory and later stages
read only earlier artifacts, so any stage can be rerun in isolation.
Per-case failures are logged and skipped rather than aborting the batch;
the exit code distinguishes full success (0), partial failure (3) and a
stage producing nothing at all (1).  Given identical inputs, config and
seed, every artifact is byte-identical between runs.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import GliomorphError
from .evaluation import dice, make_folds, pool_and_score
from .features import ShapeFeatureRecord, extract_features
from .components import keep_largest_component
from .manifest import CaseManifest, CaseRecord, load_manifest, save_manifest
from .preprocessing import (
    DatasetStats,
    MomentAccumulator,
    rescale_to_reference,
    window_level_normalize,
    zscore,
)
from .stats import HypothesisReport, run_hypotheses
from .volume import _atomic_write_bytes, load_volume, write_volume

EXIT_OK = 0
EXIT_TOTAL_FAILURE = 1
EXIT_PARTIAL_FAILURE = 3


@dataclass
class PipelineConfig:
    manifest: str
    out_dir: str
    seed: int = 0
    target_inplane: Tuple[int, int] = (256, 256)
    p_low: float = 0.01
    p_high: float = 0.99
    apply_zscore: bool = True
    feature_policy: str = "max_area_slice"
    point_source: str = "centers"
    alpha: float = 0.05
    bonferroni_m: Optional[int] = None
    bin_scope: str = "included"
    folds_k: Optional[int] = None
    fold_size: Optional[int] = None
    masks_dir: Optional[str] = None
    workers: int = 1

    def canonical_json(self) -> str:
        doc = asdict(self)
        doc["target_inplane"] = list(self.target_inplane)
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if "target_inplane" in doc:
            doc["target_inplane"] = tuple(doc["target_inplane"])
        return cls(**doc)


@dataclass
class PipelineResult:
    exit_code: int
    artifacts: Dict[str, Path]
    failures: List[dict] = field(default_factory=list)
    report: Optional[HypothesisReport] = None


def _write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _map_cases(cases: List[CaseRecord], fn: Callable, workers: int,
               failures: List[dict], stage: str) -> Dict[str, object]:
    """Run fn per case (optionally in threads); collect results by case_id."""

    def safe(case):
        try:
            return case.case_id, fn(case), None
        except Exception as exc:  # per-case isolation is the contract here
            return case.case_id, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(safe, cases))
    else:
        raw = [safe(c) for c in cases]
    results = {}
    for case_id, value, error in raw:
        if error is None:
            results[case_id] = value
        else:
            failures.append({"case_id": case_id, "stage": stage, "error": error})
    return results


def preprocess_stage(manifest: CaseManifest, config: PipelineConfig,
                      out: Path, failures: List[dict]) -> Tuple[CaseManifest, Optional[DatasetStats]]:
    pre_dir = out / "preprocessed"
    pre_dir.mkdir(parents=True, exist_ok=True)
    target = config.target_inplane

    def one_case(case: CaseRecord):
        case_dir = pre_dir / case.case_id
        case_dir.mkdir(parents=True, exist_ok=True)
        brain = None
        if case.brain_mask is not None:
            brain = rescale_to_reference(load_volume(case.brain_mask), target)
            write_volume(brain, case_dir / "brain_mask.gmv")
        sequences = {}
        moments = []
        for name, path in case.sequences.items():
            vol = rescale_to_reference(load_volume(path), target)
            vol = window_level_normalize(vol, brain, config.p_low, config.p_high)
            write_volume(vol, case_dir / f"{name}.gmv")
            sequences[name] = case_dir / f"{name}.gmv"
            moments.append((vol, brain))
        tumor = None
        if case.tumor_mask is not None:
            tumor_vol = rescale_to_reference(load_volume(case.tumor_mask), target)
            write_volume(tumor_vol, case_dir / "tumor_mask.gmv")
            tumor = case_dir / "tumor_mask.gmv"
        acc = MomentAccumulator()
        for vol, br in moments:
            acc.add(vol, br)
        new_case = CaseRecord(
            case_id=case.case_id,
            sequences=sequences,
            brain_mask=case_dir / "brain_mask.gmv" if brain is not None else None,
            tumor_mask=tumor,
            genomic_labels=dict(case.genomic_labels),
        )
        return new_case, acc

    results = _map_cases(manifest.cases, one_case, config.workers, failures, "preprocess")
    new_cases = []
    total = MomentAccumulator()
    for case in manifest.cases:  # deterministic reduction order
        if case.case_id not in results:
            continue
        new_case, acc = results[case.case_id]
        new_cases.append(new_case)
        if acc.n:
            total.add_moments(acc)
    stats = None
    if config.apply_zscore and total.n and total.m2 > 0:
        stats = total.finish()
        for case in new_cases:
            for name, path in case.sequences.items():
                write_volume(zscore(load_volume(path), stats), path)
    new_manifest = CaseManifest(cases=new_cases)
    save_manifest(new_manifest, pre_dir / "manifest.json")
    if stats is not None:
        _write_text(out / "stats.json", json.dumps(
            {"mean": stats.mean, "std": stats.std, "n_voxels": stats.n_voxels},
            sort_keys=True) + "\n")
    return new_manifest, stats


def postprocess_stage(manifest: CaseManifest, config: PipelineConfig,
                       out: Path, failures: List[dict]) -> Dict[str, Path]:
    clean_dir = out / "masks_clean"
    clean_dir.mkdir(parents=True, exist_ok=True)
    masks_dir = Path(config.masks_dir) if config.masks_dir else None

    def one_case(case: CaseRecord):
        if masks_dir is not None:
            src = masks_dir / f"{case.case_id}.gmv"
        elif case.tumor_mask is not None:
            src = case.tumor_mask
        else:
            raise GliomorphError("no mask available (no masks_dir and no tumor_mask)")
        clean = keep_largest_component(load_volume(src))
        dst = clean_dir / f"{case.case_id}.gmv"
        write_volume(clean, dst)
        return dst

    return _map_cases(manifest.cases, one_case, config.workers, failures, "postprocess")


def format_features_tsv(records: List[ShapeFeatureRecord]) -> str:
    lines = ["case_id\tasd\tbevr\tmf\tslice_used\ttumor_voxels"]
    for r in sorted(records, key=lambda r: r.case_id):
        lines.append(
            f"{r.case_id}\t{r.asd!r}\t{r.bevr!r}\t{r.mf!r}\t{r.slice_used}\t{r.tumor_voxels}"
        )
    return "\n".join(lines) + "\n"


def parse_features_tsv(text: str) -> List[ShapeFeatureRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    records = []
    for line in lines[1:]:
        case_id, asd, bevr, mf, slice_used, tumor_voxels = line.split("\t")
        records.append(ShapeFeatureRecord(
            case_id=case_id, asd=float(asd), bevr=float(bevr), mf=float(mf),
            slice_used=int(slice_used), tumor_voxels=int(tumor_voxels)))
    return records


def features_stage(manifest: CaseManifest, clean_masks: Dict[str, Path],
                    config: PipelineConfig, out: Path,
                    failures: List[dict]) -> List[ShapeFeatureRecord]:
    cases = [c for c in manifest.cases if c.case_id in clean_masks]

    def one_case(case: CaseRecord):
        mask = load_volume(clean_masks[case.case_id])
        return extract_features(mask, case_id=case.case_id,
                                policy=config.feature_policy,
                                point_source=config.point_source)

    results = _map_cases(cases, one_case, config.workers, failures, "features")
    records = [results[cid] for cid in sorted(results)]
    if records:
        _write_text(out / "features.tsv", format_features_tsv(records))
    return records


def evaluate_stage(manifest: CaseManifest, clean_masks: Dict[str, Path],
                    config: PipelineConfig, out: Path,
                    failures: List[dict]) -> Dict[str, float]:
    cases = [c for c in manifest.cases
             if c.tumor_mask is not None and c.case_id in clean_masks]
    if not cases:
        return {}

    def one_case(case: CaseRecord):
        return dice(load_volume(clean_masks[case.case_id]), load_volume(case.tumor_mask))

    scores = _map_cases(cases, one_case, config.workers, failures, "evaluate")
    scores = {cid: scores[cid] for cid in sorted(scores)}
    if not scores:
        return {}
    lines = ["case_id\tdice"] + [f"{cid}\t{val!r}" for cid, val in scores.items()]
    _write_text(out / "dice.tsv", "\n".join(lines) + "\n")

    fold_plan = None
    if config.folds_k and config.fold_size:
        if config.folds_k * config.fold_size == len(scores):
            fold_plan = make_folds(list(scores), config.folds_k, config.fold_size,
                                   config.seed)
            fold_plan.save(out / "folds.json")
        else:
            failures.append({
                "case_id": "", "stage": "evaluate",
                "error": f"fold config {config.folds_k}x{config.fold_size} does not "
                         f"match {len(scores)} scored cases; folds skipped"})
    summary = pool_and_score(scores, fold_plan)
    _write_text(out / "dice_summary.json", json.dumps({
        "mean": summary.mean, "median": summary.median,
        "fold_means": summary.fold_means}, sort_keys=True) + "\n")
    return scores


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage; see the module docstring for the failure policy."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failures: List[dict] = []
    artifacts: Dict[str, Path] = {}

    manifest = load_manifest(config.manifest)
    pre_manifest, _ = preprocess_stage(manifest, config, out, failures)
    artifacts["preprocessed_manifest"] = out / "preprocessed" / "manifest.json"

    clean_masks = postprocess_stage(manifest, config, out, failures)
    if clean_masks:
        artifacts["masks_clean"] = out / "masks_clean"

    records = features_stage(manifest, clean_masks, config, out, failures)
    if records:
        artifacts["features"] = out / "features.tsv"

    scores = evaluate_stage(manifest, clean_masks, config, out, failures)
    if scores:
        artifacts["dice"] = out / "dice.tsv"

    labels = {c.case_id: dict(c.genomic_labels) for c in manifest.cases
              if c.genomic_labels}
    _write_text(out / "labels.json", json.dumps(labels, indent=2, sort_keys=True) + "\n")
    report = None
    if records:
        report = run_hypotheses(records, labels, alpha=config.alpha,
                                m=config.bonferroni_m, seed=config.seed,
                                bin_scope=config.bin_scope)
        _write_text(out / "report.tsv", report.to_tsv())
        artifacts["report"] = out / "report.tsv"

    stage_outputs = [bool(pre_manifest.cases), bool(clean_masks), bool(records)]
    if not all(stage_outputs):
        exit_code = EXIT_TOTAL_FAILURE
    elif failures:
        exit_code = EXIT_PARTIAL_FAILURE
    else:
        exit_code = EXIT_OK

    import gliomorph
    import scipy

    run_log = {
        "versions": {"gliomorph": gliomorph.__version__,
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "seed": config.seed,
        "config": json.loads(config.canonical_json()),
        "config_hash": config.config_hash(),
        "failures": failures,
        "exit_code": exit_code,
        "artifacts": {k: str(v) for k, v in artifacts.items()},
    }
    _write_text(out / "run_log.json", json.dumps(run_log, indent=2, sort_keys=True) + "\n")
    return PipelineResult(exit_code=exit_code, artifacts=artifacts,
                          failures=failures, report=report)

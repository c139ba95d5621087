"""Segmentation accuracy (Dice) and cross-validation fold management."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ._rng import derive_rng
from .errors import GliomorphError
from .validation import check_mask
from .volume import VoxelVolume


def dice(a: VoxelVolume, b: VoxelVolume) -> float:
    """Dice similarity coefficient 2|A&B| / (|A| + |B|).

    Two empty masks count as perfect agreement (1.0); empty versus nonempty
    gives 0.  Raises on dimension mismatch.
    """
    check_mask(a, name="a")
    check_mask(b, name="b")
    if a.dims != b.dims:
        raise GliomorphError(f"dice: dims differ, {a.dims} vs {b.dims}")
    fa = a.data != 0
    fb = b.data != 0
    total = int(fa.sum()) + int(fb.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((fa & fb).sum()) / total


@dataclass
class FoldPlan:
    """Deterministic partition of case ids into cross-validation folds."""

    folds: List[List[str]]
    seed: int

    def case_ids(self) -> List[str]:
        return [cid for fold in self.folds for cid in fold]

    def fold_of(self, case_id: str) -> int:
        for i, fold in enumerate(self.folds):
            if case_id in fold:
                return i
        raise KeyError(case_id)

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "folds": self.folds}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        doc = json.loads(text)
        return cls(folds=[[str(c) for c in fold] for fold in doc["folds"]],
                   seed=int(doc["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FoldPlan":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def make_folds(case_ids, k: int, fold_size: int, seed: int) -> FoldPlan:
    """Shuffle case ids by seed and chunk them into k folds of fold_size.

    Ids are sorted before the seeded shuffle, so permuting the input order
    never changes the folds.  k * fold_size must equal the number of cases.
    """
    ids = sorted(str(c) for c in case_ids)
    if len(set(ids)) != len(ids):
        raise GliomorphError("duplicate case ids")
    if k <= 0 or fold_size <= 0 or k * fold_size != len(ids):
        raise GliomorphError(
            f"{len(ids)} cases cannot be split into {k} folds of exactly {fold_size}"
        )
    rng = derive_rng(seed, "folds")
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    folds = [shuffled[i * fold_size:(i + 1) * fold_size] for i in range(k)]
    return FoldPlan(folds=folds, seed=int(seed))


@dataclass
class ScoreSummary:
    mean: float
    median: float
    fold_means: Optional[List[float]] = None


def pool_and_score(per_case_dice: Dict[str, float],
                   fold_plan: Optional[FoldPlan] = None) -> ScoreSummary:
    """Pool per-case Dice values into mean, median and per-fold means."""
    if not per_case_dice:
        raise GliomorphError("no Dice values to pool")
    values = np.array(list(per_case_dice.values()), dtype=np.float64)
    fold_means = None
    if fold_plan is not None:
        fold_means = []
        for fold in fold_plan.folds:
            scores = [per_case_dice[c] for c in fold if c in per_case_dice]
            fold_means.append(float(np.mean(scores)) if scores else float("nan"))
    return ScoreSummary(
        mean=float(values.mean()),
        median=float(np.median(values)),
        fold_means=fold_means,
    )

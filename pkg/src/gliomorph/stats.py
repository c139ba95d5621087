"""Radiogenomic association testing.

Continuous shape features are quartile-binned, crossed with molecular
subtype labels into contingency tables, and tested with the two-sided
Fisher exact test (Freeman-Halton for r x c): the p-value sums the
probabilities of all tables sharing the observed margins whose
hypergeometric probability does not exceed the observed table's, with a
1e-7 relative tolerance on the comparison, mirroring R's fisher.test.
Tables whose margin-constrained space exceeds the enumeration budget fall
back to seeded Monte Carlo with a reported standard error.  Ten fixed
feature/subtype hypotheses are evaluated with Bonferroni correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._rng import derive_key, derive_rng
from .errors import DegenerateInputError, GliomorphError, InsufficientDataError
from .features import ShapeFeatureRecord
from .manifest import SUBTYPE_SCHEMES

FEATURE_NAMES = ("asd", "bevr", "mf")

#: Relative tolerance when comparing table probabilities to the observed one.
PROBABILITY_REL_TOL = 1e-7

#: Exact enumeration budget (number of margin-respecting tables).
MAX_EXACT_TABLES = 10_000_000

#: Largest table shape (sorted dims) handled by exact enumeration.
MAX_EXACT_SHAPE = (4, 5)

DEFAULT_MC_SAMPLES = 1_000_000


@dataclass(frozen=True)
class HypothesisSpec:
    """One (shape feature, subtype scheme) pair from the fixed hypothesis set."""

    feature: str
    scheme: str

    def __post_init__(self):
        if self.feature not in FEATURE_NAMES:
            raise GliomorphError(f"unknown feature {self.feature!r}")
        if self.scheme not in SUBTYPE_SCHEMES:
            raise GliomorphError(f"unknown subtype scheme {self.scheme!r}")


#: The ten tested feature/scheme combinations, in reporting order.
HYPOTHESES: Tuple[HypothesisSpec, ...] = (
    HypothesisSpec("bevr", "RNASeq"),
    HypothesisSpec("bevr", "miRNA"),
    HypothesisSpec("bevr", "CNC"),
    HypothesisSpec("bevr", "COC"),
    HypothesisSpec("mf", "RNASeq"),
    HypothesisSpec("asd", "IDH_1p19q"),
    HypothesisSpec("asd", "RNASeq"),
    HypothesisSpec("asd", "Methylation"),
    HypothesisSpec("asd", "CNC"),
    HypothesisSpec("asd", "COC"),
)


@dataclass
class QuartileBins:
    bins: np.ndarray
    breakpoints: Tuple[float, float, float]
    degenerate: bool


def quartile_bin(values) -> QuartileBins:
    """Map values to quartile numbers 1..4.

    Breakpoints are the linearly interpolated quartiles of the input; a value
    equal to a breakpoint goes to the lower bin.  All-equal input is flagged
    degenerate and binned entirely into quartile 1.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 4:
        raise InsufficientDataError(f"quartile binning needs >= 4 values, got {v.size}")
    if not np.isfinite(v).all():
        raise GliomorphError("quartile binning requires finite values")
    breaks = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    bins = np.searchsorted(breaks, v, side="left").astype(np.int64) + 1
    degenerate = bool(v.min() == v.max())
    if degenerate:
        bins = np.ones_like(bins)
    return QuartileBins(bins=bins, breakpoints=tuple(float(b) for b in breaks),
                        degenerate=degenerate)


class QuartileBinner(TransformerMixin, BaseEstimator):
    """Learn quartile breakpoints on fit, bin values on transform."""

    def fit(self, X, y=None):
        result = quartile_bin(X)
        self.breakpoints_ = result.breakpoints
        self.degenerate_ = result.degenerate
        return self

    def transform(self, X):
        check_is_fitted(self, "breakpoints_")
        v = np.asarray(X, dtype=np.float64).ravel()
        if self.degenerate_:
            return np.ones(v.size, dtype=np.int64)
        return np.searchsorted(np.asarray(self.breakpoints_), v, side="left").astype(np.int64) + 1


@dataclass
class ContingencyTable:
    """Quartile-by-subtype count table."""

    counts: np.ndarray
    row_labels: List[int]
    col_labels: List[str]
    degenerate_binning: bool = False

    @property
    def n_cases(self) -> int:
        return int(self.counts.sum())


def build_table(records: Sequence[ShapeFeatureRecord],
                labels: Dict[str, Dict[str, str]],
                spec: HypothesisSpec,
                bin_scope: str = "included") -> ContingencyTable:
    """Cross quartile-binned feature values with subtype labels.

    Only cases carrying both the feature and a label for ``spec.scheme`` enter
    the table.  ``bin_scope`` controls which cases define the quartile
    breakpoints: ``"included"`` (default) uses exactly the tabulated cases,
    ``"all"`` uses every case with a feature value.
    """
    if bin_scope not in ("included", "all"):
        raise GliomorphError(f"unknown bin_scope {bin_scope!r}")
    vocab = SUBTYPE_SCHEMES[spec.scheme]
    rows = []
    for rec in records:
        value = float(getattr(rec, spec.feature))
        label = labels.get(rec.case_id, {}).get(spec.scheme)
        if label is not None and label not in vocab:
            raise GliomorphError(
                f"case {rec.case_id}: label {label!r} not in {spec.scheme} vocabulary"
            )
        rows.append((rec.case_id, value, label))
    included = [(v, lab) for _, v, lab in rows if lab is not None]
    if len(included) < 4:
        raise InsufficientDataError(
            f"{spec.feature} x {spec.scheme}: {len(included)} cases with both "
            "imaging and genomic data, need >= 4"
        )
    if bin_scope == "included":
        binning = quartile_bin([v for v, _ in included])
        bins = binning.bins
    else:
        binning = quartile_bin([v for _, v, _ in rows])
        keep = [i for i, (_, _, lab) in enumerate(rows) if lab is not None]
        bins = binning.bins[keep]
    observed_labels = [lab for lab in vocab if any(l == lab for _, l in included)]
    col_index = {lab: j for j, lab in enumerate(observed_labels)}
    counts = np.zeros((4, len(observed_labels)), dtype=np.int64)
    for (v, lab), b in zip(included, bins):
        counts[b - 1, col_index[lab]] += 1
    return ContingencyTable(counts=counts, row_labels=[1, 2, 3, 4],
                            col_labels=observed_labels,
                            degenerate_binning=binning.degenerate)


@dataclass
class FisherResult:
    p: float
    method: str  # "exact" or "monte_carlo"
    n_tables: Optional[int] = None
    n_samples: Optional[int] = None
    se: Optional[float] = None


class _BudgetExceeded(Exception):
    pass


def _log_factorials(n: int) -> List[float]:
    lf = [0.0] * (n + 1)
    for i in range(2, n + 1):
        lf[i] = lf[i - 1] + math.log(i)
    return lf


def _exact_p(counts: np.ndarray, max_tables: int, rel_tol: float) -> Tuple[float, int]:
    rows = [int(x) for x in counts.sum(axis=1)]
    cols = [int(x) for x in counts.sum(axis=0)]
    n = sum(rows)
    lf = _log_factorials(n)
    log_const = math.fsum([lf[x] for x in rows] + [lf[x] for x in cols]) - lf[n]
    log_obs = log_const - math.fsum(lf[int(x)] for x in counts.reshape(-1))
    threshold = log_obs + math.log1p(rel_tol)

    r, c = len(rows), len(cols)
    rem = list(cols)
    n_seen = 0
    acc = 0.0
    comp = 0.0
    exp = math.exp

    def leaf(partial: float) -> None:
        nonlocal n_seen, acc, comp
        n_seen += 1
        if n_seen > max_tables:
            raise _BudgetExceeded
        total = partial
        for v in rem:
            total += lf[v]
        logp = log_const - total
        if logp <= threshold:
            # Neumaier compensated accumulation
            term = exp(logp)
            s = acc + term
            if abs(acc) >= abs(term):
                comp += (acc - s) + term
            else:
                comp += (term - s) + acc
            acc = s

    def rec_cell(i: int, j: int, row_rem: int, partial: float) -> None:
        if j == c - 1:
            v = row_rem
            if v <= rem[j]:
                rem[j] -= v
                if i == r - 2:
                    leaf(partial + lf[v])
                else:
                    rec_cell(i + 1, 0, rows[i + 1], partial + lf[v])
                rem[j] += v
            return
        suffix = 0
        for jj in range(j + 1, c):
            suffix += rem[jj]
        lo = row_rem - suffix
        if lo < 0:
            lo = 0
        hi = min(row_rem, rem[j])
        for v in range(lo, hi + 1):
            rem[j] -= v
            rec_cell(i, j + 1, row_rem - v, partial + lf[v])
            rem[j] += v

    rec_cell(0, 0, rows[0], 0.0)
    return min(acc + comp, 1.0), n_seen


def _mc_p(counts: np.ndarray, n_samples: int, seed: int,
          rel_tol: float) -> Tuple[float, float]:
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    n = int(rows.sum())
    r, c = len(rows), len(cols)
    lf = np.array(_log_factorials(n), dtype=np.float64)
    log_const = math.fsum([float(lf[x]) for x in rows] + [float(lf[x]) for x in cols]) - float(lf[n])
    log_obs = log_const - math.fsum(float(lf[int(x)]) for x in counts.reshape(-1))
    threshold = log_obs + math.log1p(rel_tol)

    col_vec = np.repeat(np.arange(c, dtype=np.int8), cols)
    offsets = np.concatenate([[0], np.cumsum(rows)]).astype(int)
    rng = derive_rng(seed, "fisher_mc")
    hits = 0
    remaining = int(n_samples)
    batch_size = max(1, min(200_000, remaining))
    while remaining > 0:
        b = min(batch_size, remaining)
        perms = rng.permuted(np.tile(col_vec, (b, 1)), axis=1)
        cell_lf = np.zeros(b, dtype=np.float64)
        for i in range(r):
            sub = perms[:, offsets[i]:offsets[i + 1]]
            for j in range(c):
                cnt = (sub == j).sum(axis=1)
                cell_lf += lf[cnt]
        logp = log_const - cell_lf
        hits += int((logp <= threshold).sum())
        remaining -= b
    p = (hits + 1) / (n_samples + 1)
    se = math.sqrt(p * (1.0 - p) / n_samples)
    return p, se


def fisher_exact(table, *, max_tables: int = MAX_EXACT_TABLES,
                 mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0,
                 rel_tol: float = PROBABILITY_REL_TOL) -> FisherResult:
    """Two-sided Fisher exact test for an r x c contingency table.

    All-zero rows and columns are dropped before testing (they carry no
    information).  A table that is effectively a single row or column has
    p = 1.  Enumeration runs when the margin-respecting table space holds at
    most ``max_tables`` tables and the (sorted) shape is at most 4 x 5;
    otherwise a seeded Monte Carlo estimate of ``mc_samples`` permutations is
    returned, with p = (hits + 1) / (samples + 1) and its standard error.
    """
    counts = np.asarray(table.counts if isinstance(table, ContingencyTable) else table,
                        dtype=np.int64)
    if counts.ndim != 2:
        raise GliomorphError(f"contingency table must be 2D, got shape {counts.shape}")
    if (counts < 0).any():
        raise GliomorphError("contingency table counts must be nonnegative")
    if counts.sum() == 0:
        raise DegenerateInputError("contingency table has zero grand total")
    counts = counts[counts.sum(axis=1) > 0][:, counts.sum(axis=0) > 0]
    r, c = counts.shape
    if r == 1 or c == 1:
        return FisherResult(p=1.0, method="exact", n_tables=1)
    small, large = sorted((r, c))
    if small <= MAX_EXACT_SHAPE[0] and large <= MAX_EXACT_SHAPE[1]:
        try:
            p, n_tables = _exact_p(counts, max_tables, rel_tol)
            return FisherResult(p=p, method="exact", n_tables=n_tables)
        except _BudgetExceeded:
            pass
    p, se = _mc_p(counts, mc_samples, seed, rel_tol)
    return FisherResult(p=p, method="monte_carlo", n_samples=int(mc_samples), se=se)


def bonferroni(pvalues: Dict[HypothesisSpec, float], alpha: float = 0.05,
               m: Optional[int] = None) -> Dict[HypothesisSpec, bool]:
    """Strict Bonferroni significance: p < alpha / m."""
    if m is None:
        m = len(pvalues)
    if m < 1:
        raise GliomorphError("Bonferroni correction needs m >= 1")
    return {spec: p < alpha / m for spec, p in pvalues.items()}


@dataclass
class HypothesisRow:
    spec: HypothesisSpec
    status: str  # "ok" or "insufficient_data"
    n_cases: int = 0
    table: Optional[ContingencyTable] = None
    p: Optional[float] = None
    significant: Optional[bool] = None
    method: Optional[str] = None
    se: Optional[float] = None
    degenerate_binning: bool = False
    detail: str = ""


@dataclass
class HypothesisReport:
    rows: List[HypothesisRow]
    alpha: float
    m: int

    def to_tsv(self) -> str:
        header = ["feature", "scheme", "status", "n_cases", "p_value",
                  "significant", "method", "mc_se", "degenerate_binning"]
        lines = ["\t".join(header)]
        for row in self.rows:
            lines.append("\t".join([
                row.spec.feature,
                row.spec.scheme,
                row.status,
                str(row.n_cases),
                "" if row.p is None else repr(row.p),
                "" if row.significant is None else str(int(row.significant)),
                row.method or "",
                "" if row.se is None else repr(row.se),
                str(int(row.degenerate_binning)),
            ]))
        return "\n".join(lines) + "\n"


def run_hypotheses(records: Sequence[ShapeFeatureRecord],
                   labels: Dict[str, Dict[str, str]],
                   *, alpha: float = 0.05, m: Optional[int] = None, seed: int = 0,
                   bin_scope: str = "included",
                   max_tables: int = MAX_EXACT_TABLES,
                   mc_samples: int = DEFAULT_MC_SAMPLES) -> HypothesisReport:
    """Evaluate the fixed ten feature/subtype hypotheses.

    Always emits exactly one row per hypothesis; rows without enough
    overlapping cases are marked ``insufficient_data`` rather than skipped.
    Significance uses the Bonferroni threshold alpha / m, with m defaulting
    to the number of hypotheses (10).
    """
    if m is None:
        m = len(HYPOTHESES)
    if m < 1:
        raise GliomorphError("Bonferroni correction needs m >= 1")
    rows = []
    for spec in HYPOTHESES:
        try:
            table = build_table(records, labels, spec, bin_scope=bin_scope)
        except InsufficientDataError as exc:
            rows.append(HypothesisRow(spec=spec, status="insufficient_data",
                                      detail=str(exc)))
            continue
        result = fisher_exact(table, max_tables=max_tables, mc_samples=mc_samples,
                              seed=derive_key(seed, "hypothesis", spec.feature, spec.scheme))
        rows.append(HypothesisRow(
            spec=spec,
            status="ok",
            n_cases=table.n_cases,
            table=table,
            p=result.p,
            significant=bool(result.p < alpha / m),
            method=result.method,
            se=result.se,
            degenerate_binning=table.degenerate_binning,
        ))
    return HypothesisReport(rows=rows, alpha=alpha, m=m)

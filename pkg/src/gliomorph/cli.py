"""Command-line interface.

Subcommands mirror the pipeline stages: preprocess, trainprep, postprocess,
features, evaluate, associate, pipeline, phantoms.  All outputs are GMVOL1
volumes, TSV tables or JSON documents.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .components import keep_largest_component
from .errors import GliomorphError
from .evaluation import FoldPlan, dice, make_folds, pool_and_score
from .features import SLICE_POLICIES, extract_features
from .manifest import load_manifest
from .phantoms import generate_phantoms
from .pipeline import (
    EXIT_OK,
    EXIT_PARTIAL_FAILURE,
    EXIT_TOTAL_FAILURE,
    PipelineConfig,
    format_features_tsv,
    parse_features_tsv,
    preprocess_stage,
    run_pipeline,
)
from .stats import run_hypotheses
from .trainprep import CHANNEL_MODES, build_plan
from .volume import load_volume, write_volume


def _warn(msg: str) -> None:
    print(f"gliomorph: {msg}", file=sys.stderr)


def _status(failures) -> int:
    if failures:
        for f in failures:
            _warn(f"[{f['stage']}] {f['case_id']}: {f['error']}")
        return EXIT_PARTIAL_FAILURE
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    manifest = load_manifest(args.manifest)
    config = PipelineConfig(
        manifest=str(args.manifest), out_dir=str(args.out), seed=args.seed,
        target_inplane=tuple(args.target), p_low=args.plow, p_high=args.phigh,
        apply_zscore=not args.no_zscore, workers=args.workers,
    )
    failures = []
    new_manifest, _ = preprocess_stage(manifest, config, Path(args.out), failures)
    if not new_manifest.cases:
        _status(failures)
        return EXIT_TOTAL_FAILURE
    return _status(failures)


def _cmd_trainprep(args) -> int:
    manifest = load_manifest(args.manifest)
    plan = build_plan(manifest, args.seed, channel_mode=args.channel_mode)
    Path(args.out).write_text(plan.to_json(), encoding="utf-8")
    return EXIT_OK


def _cmd_postprocess(args) -> int:
    write_volume(keep_largest_component(load_volume(args.input)), args.out)
    return EXIT_OK


def _cmd_features(args) -> int:
    manifest = load_manifest(args.manifest)
    failures = []
    records = []
    for case in manifest.cases:
        if args.masks:
            path = Path(args.masks) / f"{case.case_id}.gmv"
        else:
            path = case.tumor_mask
        try:
            if path is None:
                raise GliomorphError("no mask available")
            records.append(extract_features(
                load_volume(path), case_id=case.case_id,
                policy=args.policy, point_source=args.point_source))
        except Exception as exc:
            failures.append({"case_id": case.case_id, "stage": "features",
                             "error": f"{type(exc).__name__}: {exc}"})
    if not records:
        _status(failures)
        return EXIT_TOTAL_FAILURE
    Path(args.out).write_text(format_features_tsv(records), encoding="utf-8")
    return _status(failures)


def _cmd_evaluate(args) -> int:
    pred_dir, truth_dir = Path(args.pred), Path(args.truth)
    case_ids = sorted(p.stem for p in pred_dir.glob("*.gmv"))
    scores = {}
    failures = []
    for cid in case_ids:
        truth_path = truth_dir / f"{cid}.gmv"
        if not truth_path.is_file():
            failures.append({"case_id": cid, "stage": "evaluate",
                             "error": "no ground-truth mask"})
            continue
        try:
            scores[cid] = dice(load_volume(pred_dir / f"{cid}.gmv"),
                               load_volume(truth_path))
        except Exception as exc:
            failures.append({"case_id": cid, "stage": "evaluate",
                             "error": f"{type(exc).__name__}: {exc}"})
    if not scores:
        _status(failures)
        return EXIT_TOTAL_FAILURE
    fold_plan = None
    if args.folds:
        fold_plan = FoldPlan.load(args.folds)
    elif args.make_folds:
        k, fold_size = args.make_folds
        fold_plan = make_folds(list(scores), k, fold_size, args.seed)
        fold_plan.save(args.folds_out)
    summary = pool_and_score(scores, fold_plan)
    lines = ["case_id\tdice"] + [f"{cid}\t{val!r}" for cid, val in sorted(scores.items())]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    _warn(f"dice mean={summary.mean:.4f} median={summary.median:.4f} over {len(scores)} cases")
    return _status(failures)


def _cmd_associate(args) -> int:
    records = parse_features_tsv(Path(args.features).read_text(encoding="utf-8"))
    labels = json.loads(Path(args.labels).read_text(encoding="utf-8"))
    report = run_hypotheses(records, labels, alpha=args.alpha, seed=args.seed,
                            bin_scope=args.bin_scope)
    Path(args.out).write_text(report.to_tsv(), encoding="utf-8")
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    if args.config:
        config = PipelineConfig.from_json(args.config)
    else:
        if not args.manifest or not args.out:
            _warn("pipeline needs --config or both --manifest and --out")
            return 2
        config = PipelineConfig(
            manifest=str(args.manifest), out_dir=str(args.out), seed=args.seed,
            target_inplane=tuple(args.target), p_low=args.plow, p_high=args.phigh,
            feature_policy=args.policy, point_source=args.point_source,
            alpha=args.alpha, bin_scope=args.bin_scope,
            folds_k=args.folds_k, fold_size=args.fold_size,
            masks_dir=str(args.masks) if args.masks else None,
            workers=args.workers,
        )
    result = run_pipeline(config)
    for f in result.failures:
        _warn(f"[{f['stage']}] {f['case_id']}: {f['error']}")
    return result.exit_code


def _cmd_phantoms(args) -> int:
    manifest_path = generate_phantoms(args.out, args.seed, n_cases=args.cases,
                                      size=args.size)
    _warn(f"wrote phantom dataset with manifest {manifest_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gliomorph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="rescale + window/level + z-score a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target", nargs=2, type=int, default=[256, 256],
                   metavar=("NY", "NX"))
    p.add_argument("--plow", type=float, default=0.01)
    p.add_argument("--phigh", type=float, default=0.99)
    p.add_argument("--no-zscore", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("trainprep", help="build the oversampling/augmentation plan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--channel-mode", choices=CHANNEL_MODES, default="auto")
    p.set_defaults(func=_cmd_trainprep)

    p = sub.add_parser("postprocess", help="keep the largest 6-connected component")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_postprocess)

    p = sub.add_parser("features", help="extract ASD/BEVR/MF per case")
    p.add_argument("--manifest", required=True)
    p.add_argument("--masks", help="directory of {case_id}.gmv masks "
                   "(default: tumor masks from the manifest)")
    p.add_argument("--out", required=True)
    p.add_argument("--policy", choices=SLICE_POLICIES, default="max_area_slice")
    p.add_argument("--point-source", choices=("centers", "corners"), default="centers")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("evaluate", help="Dice of predicted vs ground-truth masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", help="existing folds.json to aggregate by")
    p.add_argument("--make-folds", nargs=2, type=int, metavar=("K", "SIZE"))
    p.add_argument("--folds-out", default="folds.json")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("associate", help="quartile binning + Fisher exact + Bonferroni")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bin-scope", choices=("included", "all"), default="included")
    p.set_defaults(func=_cmd_associate)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--config", help="JSON file with PipelineConfig fields")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", nargs=2, type=int, default=[256, 256])
    p.add_argument("--plow", type=float, default=0.01)
    p.add_argument("--phigh", type=float, default=0.99)
    p.add_argument("--policy", choices=SLICE_POLICIES, default="max_area_slice")
    p.add_argument("--point-source", choices=("centers", "corners"), default="centers")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bin-scope", choices=("included", "all"), default="included")
    p.add_argument("--folds-k", type=int)
    p.add_argument("--fold-size", type=int)
    p.add_argument("--masks", help="directory of predicted {case_id}.gmv masks")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("phantoms", help="generate a synthetic phantom dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=8)
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(func=_cmd_phantoms)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GliomorphError as exc:
        _warn(str(exc))
        return EXIT_TOTAL_FAILURE


if __name__ == "__main__":
    sys.exit(main())

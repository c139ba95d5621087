"""Acceptance suite.

Each test pins one release criterion at its stated tolerance and prints a
single pass/fail line (visible with ``pytest -s`` or in failure output).
"""

import time
from fractions import Fraction

import numpy as np

from gliomorph import (
    AugmentationPlan,
    CaseRecord,
    HypothesisSpec,
    ShapeFeatureRecord,
    VoxelVolume,
    bonferroni,
    dice,
    extract_features,
    fisher_exact,
    label_components_6,
    make_folds,
    min_bounding_ellipsoid,
    plan_oversampling,
    radial_profile_of_points,
    run_hypotheses,
    write_volume,
)
from gliomorph.cli import main
from gliomorph.features import asd_from_profile, mf_from_signal
from gliomorph.phantoms import ball_mask, disk_mask, generate_phantoms, star_mask
from oracles import fisher_p_fraction, flood_fill_label_6


def _verdict(number, ok, description):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {description}")
    assert ok, f"criterion {number} failed: {description}"


def test_criterion_1_connected_components_oracle():
    start = time.monotonic()
    all_equal = True
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        m = (rng.random((32, 32, 32)) < 0.2).astype(np.uint8)
        labeling = label_components_6(VoxelVolume(m, (1.0, 1.0, 1.0), "mask"))
        oracle_labels, oracle_k = flood_fill_label_6(m)
        if labeling.n_components != oracle_k or not np.array_equal(
            labeling.labels, oracle_labels
        ):
            all_equal = False
            break
    elapsed = time.monotonic() - start
    _verdict(
        1,
        all_equal and elapsed < 10.0,
        f"100 random 32^3 masks match the flood-fill oracle exactly "
        f"({elapsed:.1f}s < 10s)",
    )


def test_criterion_2_fisher_exact_oracle():
    fixed = fisher_exact([[3, 1], [1, 3]])
    fixed_ok = (
        fixed.method == "exact"
        and abs(fixed.p - float(Fraction(34, 70))) <= 1e-12
    )

    rng = np.random.default_rng(424242)
    worst = 0.0
    tested = 0
    attempts = 0
    while tested < 200 and attempts < 600:
        attempts += 1
        r = int(rng.integers(2, 5))
        c = int(rng.integers(2, 5))
        n = int(rng.integers(8, 41))
        counts = rng.multinomial(n, np.ones(r * c) / (r * c)).reshape(r, c)
        result = fisher_exact(counts, max_tables=100_000)
        if result.method != "exact":
            continue  # table space over the sampling budget; redraw
        oracle = float(fisher_p_fraction(counts))
        worst = max(worst, abs(result.p - oracle))
        tested += 1
    _verdict(
        2,
        fixed_ok and tested == 200 and worst <= 1e-9,
        f"200 random tables within 1e-9 of the exact-rational oracle "
        f"(worst {worst:.2e}); [[3,1],[1,3]] = 34/70 within 1e-12",
    )


def test_criterion_3_mvee_certificate():
    corners = np.array(
        [[z, y, x] for z in (0, 1) for y in (0, 1) for x in (0, 1)], dtype=float
    )
    ell = min_bounding_ellipsoid(corners, tolerance=1e-6)
    radius = np.sqrt(3) / 2
    cube_ok = bool(np.abs(ell.semi_axes - radius).max() <= 1e-4)

    k = np.arange(2000) + 0.5
    phi = np.arccos(1 - 2 * k / 2000)
    theta = np.pi * (1 + np.sqrt(5)) * k
    surface = np.stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)],
        axis=1,
    ) * np.array([1.0, 2.0, 3.0])
    ell_s = min_bounding_ellipsoid(surface, tolerance=1e-6)
    surface_ok = bool(
        np.abs(np.sort(ell_s.semi_axes) - [1.0, 2.0, 3.0]).max() <= 0.01 * 3.0
    )

    certified = True
    for seed in range(100):
        rng = np.random.default_rng(20_000 + seed)
        n = int(rng.integers(4, 201))
        pts = rng.normal(size=(n, 3)) * rng.uniform(0.5, 3.0, size=3)
        e = min_bounding_ellipsoid(pts, tolerance=1e-6)
        if e.squared_form(pts).max() > 1.0 + 1e-6:
            certified = False
            break
    _verdict(
        3,
        cube_ok and surface_ok and certified,
        "MVEE certificate holds on 100 random point sets; cube corners give "
        "radius sqrt(3)/2 within 1e-4; (1,2,3) surface recovered within 1%",
    )


def test_criterion_4_phantom_feature_suite():
    start = time.monotonic()
    ball = VoxelVolume(ball_mask((128, 128, 128), (64, 64, 64), 30),
                       (1.0, 1.0, 1.0), "mask")
    rec = extract_features(ball, "ball")

    disk3d = np.zeros((3, 101, 101), dtype=np.uint8)
    disk3d[1] = disk_mask((101, 101), (50, 50), 30)
    spiked3d = disk3d.copy()
    spiked3d[1, 50, 50:93] = 1
    spiked3d[1, 49, 50:90] = 1
    r_disk = extract_features(VoxelVolume(disk3d, (1.0, 1.0, 1.0), "mask"), "disk")
    r_spiked = extract_features(VoxelVolume(spiked3d, (1.0, 1.0, 1.0), "mask"), "spiked")
    elapsed = time.monotonic() - start

    ball_ok = rec.asd <= 0.05 and rec.mf <= 0.02 and rec.bevr >= 0.95
    spike_ok = r_spiked.asd > r_disk.asd and r_spiked.mf > r_disk.mf
    _verdict(
        4,
        ball_ok and spike_ok and elapsed < 30.0,
        f"ball r=30: asd={rec.asd:.4f}<=0.05 mf={rec.mf:.4f}<=0.02 "
        f"bevr={rec.bevr:.4f}>=0.95; spiked disk exceeds disk on ASD and MF "
        f"({elapsed:.1f}s < 30s)",
    )


def test_criterion_5_invariance_suite():
    base = np.zeros((40, 48, 48), dtype=np.uint8)
    base[8:24] = star_mask((48, 48), (22, 24), 9, 0.22, 8)[None]
    m1 = VoxelVolume(base, (1.0, 1.0, 1.0), "mask")
    m2 = VoxelVolume(np.roll(base, (9, -6, 5), axis=(0, 1, 2)), (1.0, 1.0, 1.0), "mask")
    r1 = extract_features(m1, "a")
    r2 = extract_features(m2, "b")
    translation_ok = (r1.asd == r2.asd) and (r1.bevr == r2.bevr) and (r1.mf == r2.mf)

    theta = 2 * np.pi * (np.arange(256) + 0.37) / 256
    radii = 10 + np.sin(6 * theta) + 0.4 * np.cos(13 * theta)
    pts = np.stack([radii * np.sin(theta), radii * np.cos(theta)], axis=1)
    scale_ok = True
    p_base = radial_profile_of_points(pts)
    for k in (0.5, 2.0, 37.0):
        p_scaled = radial_profile_of_points(pts * k)
        if abs(asd_from_profile(p_base) - asd_from_profile(p_scaled)) > 1e-12:
            scale_ok = False
        if abs(mf_from_signal(p_base.distances) - mf_from_signal(p_scaled.distances)) > 1e-12:
            scale_ok = False
    _verdict(
        5,
        translation_ok and scale_ok,
        "integer translation leaves (asd, bevr, mf) bit-identical; contour "
        "scaling leaves ASD and MF unchanged within 1e-12",
    )


def test_criterion_6_protocol_constants():
    ids = [f"case_{i:03d}" for i in range(110)]
    plan = make_folds(ids, 22, 5, seed=2024)
    folds_ok = (
        len(plan.folds) == 22
        and all(len(f) == 5 for f in plan.folds)
        and sorted(plan.case_ids()) == ids
    )

    specs = {HypothesisSpec("asd", "RNASeq"): 0.0049,
             HypothesisSpec("bevr", "RNASeq"): 0.005}
    flags = bonferroni(specs, alpha=0.05, m=10)
    bonferroni_ok = flags[HypothesisSpec("asd", "RNASeq")] and \
        not flags[HypothesisSpec("bevr", "RNASeq")]

    rng = np.random.default_rng(88)
    records = [ShapeFeatureRecord(f"c{i}", float(rng.random()), float(rng.random()),
                                  float(rng.random()), 0, 5) for i in range(12)]
    from gliomorph import SUBTYPE_SCHEMES
    labels = {r.case_id: {s: v[int(rng.integers(len(v)))]
                          for s, v in SUBTYPE_SCHEMES.items()} for r in records}
    full = run_hypotheses(records, labels, seed=1)
    empty = run_hypotheses(records, {}, seed=1)
    rows_ok = len(full.rows) == 10 and len(empty.rows) == 10
    _verdict(
        6,
        folds_ok and bonferroni_ok and rows_ok,
        "22 disjoint folds of 5 from 110 ids; p=0.0049 significant and "
        "p=0.005 not at alpha/m = 0.005; hypothesis runner always emits 10 rows",
    )


def test_criterion_7_trainprep_determinism(tmp_path):
    nz, n = 12, 24
    flair = np.zeros((nz, n, n), dtype=np.float32)
    brain = np.zeros((nz, n, n), dtype=np.uint8)
    tumor = np.zeros((nz, n, n), dtype=np.uint8)
    yy, xx = np.mgrid[0:n, 0:n]
    brain_disk = ((yy - 12) ** 2 + (xx - 12) ** 2 <= 81).astype(np.uint8)
    for z in range(1, 11):  # exactly 10 nonempty slices
        brain[z] = brain_disk
        flair[z] = 70.0 * brain_disk
    for z in (4, 7):  # 2 tumor slices
        tumor[z, 10:15, 10:15] = 1
    paths = {}
    for name, data, kind in [("flair", flair, "intensity"), ("brain", brain, "mask"),
                             ("tumor", tumor, "mask")]:
        write_volume(VoxelVolume(data, (1.0, 1.0, 1.0), kind), tmp_path / f"{name}.gmv")
        paths[name] = tmp_path / f"{name}.gmv"
    case = CaseRecord("phantom", {"flair": paths["flair"]},
                      brain_mask=paths["brain"], tumor_mask=paths["tumor"])

    kept = list(range(1, 11))
    plan = plan_oversampling(case, kept, seed=99)
    count_ok = len(plan.entries) == 14
    per_slice = {z: [e.transform.type for e in plan.entries if e.z == z]
                 for z in (4, 7)}
    triple_ok = all(sorted(v) == ["identity", "rotate", "scale"]
                    for v in per_slice.values())
    ranges_ok = True
    for e in plan.entries:
        if e.transform.type == "rotate" and not (5.0 <= abs(e.transform.angle_deg) <= 15.0):
            ranges_ok = False
        if e.transform.type == "scale":
            mag = max(e.transform.factor, 1.0 / e.transform.factor)
            if not (1.04 <= mag <= 1.08):
                ranges_ok = False
    again = plan_oversampling(case, kept, seed=99)
    bytes_ok = plan.to_json().encode() == again.to_json().encode()
    roundtrip_ok = AugmentationPlan.from_json(plan.to_json()).to_json() == plan.to_json()
    _verdict(
        7,
        count_ok and triple_ok and ranges_ok and bytes_ok and roundtrip_ok,
        "2 tumor slices among 10 kept give a 14-entry plan with each tumor "
        "slice 3x; rotations in [5,15] deg, scales in [4%,8%]; same seed is "
        "byte-identical",
    )


def test_criterion_8_dice_properties():
    ok = True
    a = np.zeros((1, 4, 2), dtype=np.uint8)
    b = np.zeros((1, 4, 2), dtype=np.uint8)
    a[0, 0:4, 0] = 1
    b[0, 2:4, :] = 1
    mk = lambda arr: VoxelVolume(arr, (1.0, 1.0, 1.0), "mask")
    ok &= dice(mk(a), mk(b)) == 0.5
    ok &= dice(mk(np.zeros_like(a)), mk(np.zeros_like(a))) == 1.0
    disjoint_a = np.zeros((1, 2, 2), dtype=np.uint8)
    disjoint_b = np.zeros((1, 2, 2), dtype=np.uint8)
    disjoint_a[0, 0, 0] = 1
    disjoint_b[0, 1, 1] = 1
    ok &= dice(mk(disjoint_a), mk(disjoint_b)) == 0.0

    rng = np.random.default_rng(5150)
    for _ in range(1000):
        x = (rng.random((4, 6, 6)) < rng.uniform(0, 0.8)).astype(np.uint8)
        y = (rng.random((4, 6, 6)) < rng.uniform(0, 0.8)).astype(np.uint8)
        mx, my = mk(x), mk(y)
        d = dice(mx, my)
        if not (0.0 <= d <= 1.0 and d == dice(my, mx) and dice(mx, mx) == 1.0):
            ok = False
            break
    _verdict(
        8,
        bool(ok),
        "Dice symmetry, range, self=1, disjoint=0 and the 0.5 case hold over "
        "1000 seeded random mask pairs",
    )


def test_criterion_9_end_to_end_determinism(tmp_path):
    start = time.monotonic()
    data = tmp_path / "phantoms"
    generate_phantoms(data, seed=7, n_cases=8, size=64)
    outputs = []
    for run in ("run1", "run2"):
        out = tmp_path / run
        code = main(["pipeline", "--manifest", str(data / "manifest.json"),
                     "--out", str(out), "--seed", "7", "--target", "128", "128",
                     "--masks", str(data / "predictions"),
                     "--folds-k", "4", "--fold-size", "2"])
        assert code == 0
        outputs.append(out)
    features_ok = (outputs[0] / "features.tsv").read_bytes() == \
        (outputs[1] / "features.tsv").read_bytes()
    report_ok = (outputs[0] / "report.tsv").read_bytes() == \
        (outputs[1] / "report.tsv").read_bytes()
    elapsed = time.monotonic() - start
    _verdict(
        9,
        features_ok and report_ok and elapsed < 120.0,
        f"two pipeline runs with one seed give byte-identical features.tsv "
        f"and report.tsv ({elapsed:.0f}s < 120s)",
    )

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gliomorph import (
    FoldPlan,
    GliomorphError,
    VoxelVolume,
    dice,
    make_folds,
    pool_and_score,
)


def mask(data):
    return VoxelVolume(np.asarray(data, dtype=np.uint8), (1.0, 1.0, 1.0), "mask")


class TestDice:
    def test_identical_nonempty(self):
        m = mask(np.ones((2, 2, 2)))
        assert dice(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((1, 2, 2), dtype=np.uint8)
        b = np.zeros((1, 2, 2), dtype=np.uint8)
        a[0, 0, 0] = 1
        b[0, 1, 1] = 1
        assert dice(mask(a), mask(b)) == 0.0

    def test_half_overlap(self):
        a = np.zeros((1, 4, 2), dtype=np.uint8)
        b = np.zeros((1, 4, 2), dtype=np.uint8)
        a[0, 0:4, 0] = 1          # |A| = 4
        b[0, 2:4, :] = 1          # |B| = 4, intersection 2
        assert dice(mask(a), mask(b)) == 0.5

    def test_both_empty_is_one(self):
        assert dice(mask(np.zeros((2, 2, 2))), mask(np.zeros((2, 2, 2)))) == 1.0

    def test_empty_vs_nonempty_is_zero(self):
        assert dice(mask(np.zeros((1, 1, 1))), mask(np.ones((1, 1, 1)))) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(GliomorphError, match="dims"):
            dice(mask(np.zeros((1, 2, 2))), mask(np.zeros((2, 2, 2))))

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.uint8, (2, 3, 3), elements=st.integers(0, 1)),
           arrays(np.uint8, (2, 3, 3), elements=st.integers(0, 1)))
    def test_symmetry_range_self(self, a, b):
        ma, mb = mask(a), mask(b)
        d = dice(ma, mb)
        assert d == dice(mb, ma)
        assert 0.0 <= d <= 1.0
        assert dice(ma, ma) == 1.0


class TestFolds:
    def test_110_into_22x5(self):
        ids = [f"case_{i:03d}" for i in range(110)]
        plan = make_folds(ids, 22, 5, seed=42)
        assert len(plan.folds) == 22
        assert all(len(f) == 5 for f in plan.folds)
        assert sorted(plan.case_ids()) == sorted(ids)

    def test_partition_no_overlap(self):
        plan = make_folds([f"c{i}" for i in range(20)], 4, 5, seed=1)
        seen = set()
        for fold in plan.folds:
            for cid in fold:
                assert cid not in seen
                seen.add(cid)
        assert len(seen) == 20

    def test_reproducible_and_input_order_invariant(self):
        ids = [f"c{i:02d}" for i in range(10)]
        plan1 = make_folds(ids, 2, 5, seed=9)
        plan2 = make_folds(ids[::-1], 2, 5, seed=9)
        assert plan1.folds == plan2.folds
        assert make_folds(ids, 2, 5, seed=10).folds != plan1.folds

    def test_divisibility_violation(self):
        with pytest.raises(GliomorphError):
            make_folds([f"c{i}" for i in range(11)], 2, 5, seed=0)

    def test_json_roundtrip(self, tmp_path):
        plan = make_folds([f"c{i}" for i in range(10)], 2, 5, seed=3)
        plan.save(tmp_path / "folds.json")
        again = FoldPlan.load(tmp_path / "folds.json")
        assert again.folds == plan.folds and again.seed == plan.seed


class TestPooling:
    def test_two_values(self):
        s = pool_and_score({"a": 1.0, "b": 0.0})
        assert s.mean == 0.5 and s.median == 0.5

    def test_single_case(self):
        s = pool_and_score({"a": 0.84})
        assert s.mean == 0.84 and s.median == 0.84

    def test_even_count_median_midpoint(self):
        s = pool_and_score({"a": 0.0, "b": 0.2, "c": 0.8, "d": 1.0})
        assert s.median == 0.5

    def test_matches_naive_sum_oracle(self):
        rng = np.random.default_rng(6)
        values = {f"c{i:03d}": float(rng.random()) for i in range(110)}
        s = pool_and_score(values)
        naive = sum(values.values()) / len(values)
        assert abs(s.mean - naive) < 1e-12

    def test_per_fold_means(self):
        scores = {f"c{i}": float(i) for i in range(10)}
        plan = make_folds(list(scores), 2, 5, seed=0)
        s = pool_and_score(scores, plan)
        assert len(s.fold_means) == 2
        expected = [np.mean([scores[c] for c in fold]) for fold in plan.folds]
        assert np.allclose(s.fold_means, expected)

    def test_empty_rejected(self):
        with pytest.raises(GliomorphError):
            pool_and_score({})

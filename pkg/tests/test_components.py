import numpy as np
import pytest

from gliomorph import (
    VoxelVolume,
    keep_largest_component,
    label_components_6,
)
from oracles import flood_fill_label_6


def mask(data):
    return VoxelVolume(np.asarray(data, dtype=np.uint8), (1.0, 1.0, 1.0), "mask")


def test_single_voxel():
    m = np.zeros((2, 2, 2), dtype=np.uint8)
    m[0, 0, 0] = 1
    lab = label_components_6(mask(m))
    assert lab.n_components == 1
    assert lab.sizes == [1]
    assert lab.labels[0, 0, 0] == 1


def test_edge_diagonal_is_two_components():
    # (0,0,0) and (0,1,1) touch along an edge diagonal: separate under 6-conn
    m = np.zeros((1, 2, 2), dtype=np.uint8)
    m[0, 0, 0] = 1
    m[0, 1, 1] = 1
    lab = label_components_6(mask(m))
    assert lab.n_components == 2


def test_face_neighbors_merge():
    m = np.zeros((2, 1, 1), dtype=np.uint8)
    m[:, 0, 0] = 1
    assert label_components_6(mask(m)).n_components == 1


def test_labels_in_scan_order():
    m = np.zeros((1, 3, 3), dtype=np.uint8)
    m[0, 0, 2] = 1  # first in z-major scan
    m[0, 2, 0] = 1
    lab = label_components_6(mask(m))
    assert lab.labels[0, 0, 2] == 1
    assert lab.labels[0, 2, 0] == 2


def test_sizes_account_for_all_foreground():
    rng = np.random.default_rng(4)
    m = (rng.random((10, 10, 10)) < 0.3).astype(np.uint8)
    lab = label_components_6(mask(m))
    assert sum(lab.sizes) == int(m.sum())
    assert ((lab.labels > 0) == (m > 0)).all()


@pytest.mark.parametrize("seed", range(15))
def test_partition_matches_flood_fill_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    m = (rng.random((16, 16, 16)) < 0.25).astype(np.uint8)
    lab = label_components_6(mask(m))
    oracle_labels, oracle_k = flood_fill_label_6(m)
    assert lab.n_components == oracle_k
    assert np.array_equal(lab.labels, oracle_labels)


class TestKeepLargest:
    def test_sizes_10_3_1(self):
        m = np.zeros((3, 20, 4), dtype=np.uint8)
        m[0, 0:10, 0] = 1   # size 10
        m[1, 0:3, 2] = 1    # size 3
        m[2, 15, 3] = 1     # size 1
        out = keep_largest_component(mask(m))
        assert out.foreground_count() == 10
        assert (out.data[0, 0:10, 0] == 1).all()

    def test_empty_in_empty_out(self):
        out = keep_largest_component(mask(np.zeros((2, 2, 2))))
        assert out.foreground_count() == 0
        assert out.kind == "mask"

    def test_tie_broken_by_scan_order(self):
        m = np.zeros((1, 5, 5), dtype=np.uint8)
        m[0, 0, 0:2] = 1  # earlier in scan order
        m[0, 4, 0:2] = 1  # same size, later
        out = keep_largest_component(mask(m))
        assert (out.data[0, 0, 0:2] == 1).all()
        assert out.data[0, 4].sum() == 0

    def test_idempotent(self):
        rng = np.random.default_rng(12)
        m = (rng.random((12, 12, 12)) < 0.25).astype(np.uint8)
        once = keep_largest_component(mask(m))
        twice = keep_largest_component(once)
        assert np.array_equal(once.data, twice.data)

    def test_output_subset_and_connected(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            m = (rng.random((10, 10, 10)) < 0.3).astype(np.uint8)
            out = keep_largest_component(mask(m))
            assert (out.data <= m).all()
            if out.foreground_count():
                assert label_components_6(out).n_components == 1

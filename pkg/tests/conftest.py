import numpy as np
import pytest

from gliomorph import VoxelVolume, write_volume


@pytest.fixture
def intensity_volume():
    def make(data, spacing=(1.0, 1.0, 1.0)):
        return VoxelVolume(np.asarray(data, dtype=np.float32), spacing, "intensity")
    return make


@pytest.fixture
def mask_volume():
    def make(data, spacing=(1.0, 1.0, 1.0)):
        return VoxelVolume(np.asarray(data, dtype=np.uint8), spacing, "mask")
    return make


@pytest.fixture
def write_gmv(tmp_path):
    counter = {"n": 0}

    def write(volume, name=None):
        if name is None:
            counter["n"] += 1
            name = f"vol_{counter['n']:03d}.gmv"
        path = tmp_path / name
        write_volume(volume, path)
        return path

    return write

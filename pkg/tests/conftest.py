import numpy as np
import pytest
from PIL import Image


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def write_png(tmp_path):
    """Write a uint8/uint16 array (or RGB) as PNG and return its path."""
    counter = iter(range(10**6))

    def _write(arr, name=None, mode=None):
        path = tmp_path / (name or f"img_{next(counter)}.png")
        Image.fromarray(np.asarray(arr), mode=mode).save(path)
        return path

    return _write


@pytest.fixture
def desk_table():
    X = np.array([[0.8, 0.3], [0.9, 0.3], [0.7, 0.3], [0.2, 0.3], [0.1, 0.3], [0.3, 0.3]])
    y = np.array([1, 1, 1, 0, 0, 0])
    return X, y

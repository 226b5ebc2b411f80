import numpy as np
import pytest

from eqrestore import ImageBuffer
from eqrestore.errors import DimensionError, NumericError


def test_2d_input_gains_channel_axis():
    b = ImageBuffer(np.ones((3, 4)))
    assert b.shape == (3, 4, 1)
    assert b.height == 3 and b.width == 4 and b.channels == 1


def test_length_invariant():
    b = ImageBuffer.zeros(5, 7, 3)
    assert b.size == 5 * 7 * 3
    assert b.flat().shape == (105,)


def test_nonfinite_rejected():
    arr = np.ones((2, 2))
    arr[0, 0] = np.nan
    with pytest.raises(NumericError):
        ImageBuffer(arr)
    arr[0, 0] = np.inf
    with pytest.raises(NumericError):
        ImageBuffer(arr)


def test_shape_mismatch_errors():
    a = ImageBuffer.zeros(2, 2)
    b = ImageBuffer.zeros(2, 3)
    with pytest.raises(DimensionError):
        _ = a + b
    with pytest.raises(DimensionError):
        a.dot(b)


def test_algebra():
    a = ImageBuffer(np.array([[1.0, 2.0]]))
    b = ImageBuffer(np.array([[3.0, 5.0]]))
    assert np.array_equal((a + b).data.ravel(), [4.0, 7.0])
    assert np.array_equal((b - a).data.ravel(), [2.0, 3.0])
    assert np.array_equal((2 * a).data.ravel(), [2.0, 4.0])
    assert a.dot(b) == 13.0
    assert abs(b.norm() - np.sqrt(34)) < 1e-15


def test_copy_is_independent():
    a = ImageBuffer(np.zeros((2, 2)))
    c = a.copy()
    c.data[0, 0, 0] = 1.0
    assert a.data[0, 0, 0] == 0.0

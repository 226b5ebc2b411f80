"""Dense image container used everywhere: images, kernels and flat vectors.

An ImageBuffer wraps a float64 array of shape (height, width, channels),
row-major, nominal range [0, 1] for images and unconstrained for kernels
and abstract vectors.  Buffers are treated as values: operations return
new buffers and never mutate their inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericError


class ImageBuffer:
    __slots__ = ("data",)

    def __init__(self, data: np.ndarray, check: bool = True):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise DimensionError(f"expected 2-d or 3-d data, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise DimensionError(f"degenerate shape {arr.shape}")
        if check and not np.all(np.isfinite(arr)):
            raise NumericError("non-finite entries in buffer")
        self.data = arr

    # -- constructors -------------------------------------------------

    @classmethod
    def zeros(cls, height: int, width: int, channels: int = 1) -> "ImageBuffer":
        return cls(np.zeros((height, width, channels)), check=False)

    @classmethod
    def full(cls, height: int, width: int, value: float, channels: int = 1) -> "ImageBuffer":
        return cls(np.full((height, width, channels), float(value)))

    @classmethod
    def from_flat(cls, vec, height: int, width: int, channels: int = 1,
                  check: bool = True) -> "ImageBuffer":
        arr = np.asarray(vec, dtype=np.float64).reshape(height, width, channels)
        return cls(arr, check=check)

    # -- views --------------------------------------------------------

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def flat(self) -> np.ndarray:
        """Row-major flattened copy-free view when possible."""
        return self.data.reshape(-1)

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.data.copy(), check=False)

    # -- algebra ------------------------------------------------------

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))

    def dot(self, other: "ImageBuffer") -> float:
        self._require_same_shape(other)
        return float(np.dot(self.flat(), other.flat()))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return ImageBuffer(self.data * float(scalar), check=False)

    __rmul__ = __mul__

    def __neg__(self):
        return ImageBuffer(-self.data, check=False)

    def _binary(self, other, op):
        if isinstance(other, ImageBuffer):
            self._require_same_shape(other)
            return ImageBuffer(op(self.data, other.data), check=False)
        return ImageBuffer(op(self.data, float(other)), check=False)

    def _require_same_shape(self, other: "ImageBuffer"):
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __repr__(self):
        return f"ImageBuffer({self.height}x{self.width}x{self.channels})"


def as_buffer(x) -> ImageBuffer:
    return x if isinstance(x, ImageBuffer) else ImageBuffer(np.asarray(x, dtype=np.float64))


def check_finite(buf: ImageBuffer, context: str = "input") -> ImageBuffer:
    if not np.all(np.isfinite(buf.data)):
        raise NumericError(f"non-finite values in {context}")
    return buf

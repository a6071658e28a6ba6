"""Dense rank-4 tensor value type.

Every value flowing through the engine is a ``Tensor``: a float64 array in
sample x channel x row x column order, C-contiguous, no views or strides.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, SizeOverflowError

_MAX_INDEX = np.iinfo(np.intp).max


class Tensor:
    """Immutable-by-convention rank-4 float64 array.

    The wrapped ``data`` array is only mutated by layer backward/update
    passes that own it exclusively; everything else treats tensors as
    values.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim != 4:
            raise ShapeError(f"tensor must be rank 4, got rank {arr.ndim}")
        self.data = arr

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def reshaped(self, shape: tuple[int, int, int, int]) -> "Tensor":
        """Relabel to ``shape`` without touching the flat data."""
        if int(np.prod(shape)) != self.size:
            raise ShapeError(f"cannot reshape {self.shape} to {shape}: element counts differ")
        return Tensor(self.data.reshape(shape))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def _check_dims(shape) -> tuple[int, int, int, int]:
    if len(shape) != 4:
        raise ShapeError(f"shape must have 4 entries, got {len(shape)}")
    dims = tuple(int(d) for d in shape)
    if any(d < 0 for d in dims):
        raise ShapeError(f"negative dimension in shape {dims}")
    total = 1
    for d in dims:
        total *= d
    if total > _MAX_INDEX:
        raise SizeOverflowError(f"shape {dims} has {total} elements, exceeding the index range")
    return dims


def zeros(shape) -> Tensor:
    """All-zero tensor of the given 4-entry shape."""
    return Tensor(np.zeros(_check_dims(shape), dtype=np.float64))


def full(shape, value: float) -> Tensor:
    """Constant tensor of the given 4-entry shape."""
    return Tensor(np.full(_check_dims(shape), float(value), dtype=np.float64))


def dot(a: Tensor, b: Tensor) -> float:
    """Sum of elementwise products; shapes must match exactly."""
    if a.shape != b.shape:
        raise ShapeError(f"dot requires identical shapes, got {a.shape} and {b.shape}")
    return float(np.dot(a.data.ravel(), b.data.ravel()))


def flat_index(shape, n: int, c: int, h: int, w: int) -> int:
    """Row-major flat offset of element (n, c, h, w)."""
    _, C, H, W = shape
    return ((n * C + c) * H + h) * W + w


def coords_of(shape, flat: int) -> tuple[int, int, int, int]:
    """Inverse of :func:`flat_index`."""
    _, C, H, W = shape
    flat, w = divmod(flat, W)
    flat, h = divmod(flat, H)
    n, c = divmod(flat, C)
    return n, c, h, w

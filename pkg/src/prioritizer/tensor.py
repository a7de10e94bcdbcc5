"""Dense float32 tensors and the numeric kernels everything else builds on.

Values are stored as float32 in row-major order.  Reductions (dot products,
distance sums) accumulate in float64 before rounding back; activation traces
can reach 1e4-1e5 dimensions and float32 accumulation would lose too much.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteError, ShapeError


class Tensor:
    """Immutable dense float32 array with an explicit shape (rank >= 1)."""

    __slots__ = ("array",)

    def __init__(self, array) -> None:
        if np.asarray(array).ndim < 1:
            raise ShapeError("tensor rank must be >= 1")
        arr = np.ascontiguousarray(array, dtype=np.float32)
        if any(d <= 0 for d in arr.shape):
            raise ShapeError(f"tensor dimensions must be positive, got {arr.shape}")
        arr.flags.writeable = False
        self.array = arr

    @classmethod
    def from_flat(cls, shape, values) -> "Tensor":
        values = np.asarray(values, dtype=np.float32).reshape(-1)
        shape = tuple(int(d) for d in shape)
        expected = int(np.prod(shape)) if shape else 0
        if values.size != expected:
            raise ShapeError(
                f"data length {values.size} does not match shape {shape} "
                f"(expected {expected})"
            )
        return cls(values.reshape(shape))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def rank(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def data(self) -> np.ndarray:
        """Flat row-major float32 view."""
        return self.array.reshape(-1)

    def require_finite(self, context: str) -> "Tensor":
        if not np.isfinite(self.array).all():
            raise NonFiniteError(f"non-finite values in {context}")
        return self

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def _as_array(v) -> np.ndarray:
    return v.array if isinstance(v, Tensor) else np.asarray(v, dtype=np.float32)


def to_float32(arr: np.ndarray) -> np.ndarray:
    """Cast to float32; out-of-range values become inf silently (callers check)."""
    with np.errstate(over="ignore"):
        return arr.astype(np.float32)


def matmul(a, b) -> Tensor:
    """Matrix product of two rank-2 tensors, accumulated in float64."""
    am, bm = _as_array(a), _as_array(b)
    if am.ndim != 2 or bm.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {am.shape} and {bm.shape}")
    if am.shape[1] != bm.shape[0]:
        raise ShapeError(f"inner dimensions disagree: {am.shape} x {bm.shape}")
    out = to_float32(am.astype(np.float64) @ bm.astype(np.float64))
    if not np.isfinite(out).all():
        raise NonFiniteError("matmul produced non-finite values")
    return Tensor(out)


def l2_distance(a, b) -> float:
    """Euclidean distance between two equal-length vectors."""
    va, vb = _as_array(a), _as_array(b)
    if va.ndim != 1 or vb.ndim != 1:
        raise ShapeError("l2_distance needs rank-1 operands")
    if va.shape != vb.shape:
        raise ShapeError(f"length mismatch: {va.shape[0]} vs {vb.shape[0]}")
    d = va.astype(np.float64) - vb.astype(np.float64)
    return float(np.sqrt(np.dot(d, d)))


def argmax(v) -> int:
    """Index of the maximum entry; ties break toward the smallest index."""
    vv = _as_array(v)
    if vv.ndim != 1:
        raise ShapeError("argmax needs a rank-1 operand")
    if vv.size == 0:
        raise ShapeError("argmax of an empty vector")
    return int(np.argmax(vv))

"""Dataset translation to TBIN batches and label files."""

from __future__ import annotations

import warnings

import numpy as np

from .writers import DTYPE_F32, DTYPE_U32, ExportError, write_tbin


def export_dataset(arrays, labels, out_inputs, out_labels, num_classes: int | None = None) -> None:
    """Write inputs as an f32 TBIN batch and labels as u32 (classes) or f32 (targets).

    Integer labels become u32 class indices; floating labels become f32
    regression targets.  When ``num_classes`` is given, labels at or beyond
    it trigger a warning (the files are still written; range bugs surface
    loudly downstream anyway).
    """
    x = np.asarray(arrays)
    if x.ndim < 2:
        raise ExportError(f"inputs must be [N, ...], got shape {x.shape}")
    if x.size == 0:
        raise ExportError("inputs are empty")
    if not (np.issubdtype(x.dtype, np.floating) or np.issubdtype(x.dtype, np.integer)):
        raise ExportError(f"input dtype {x.dtype} is not convertible to f32")
    xf = x.astype(np.float32)
    if not np.isfinite(xf).all():
        raise ExportError("inputs contain non-finite values after f32 conversion")

    y = np.asarray(labels)
    if y.shape[0] != x.shape[0]:
        raise ExportError(f"{y.shape[0]} labels for {x.shape[0]} inputs")
    if np.issubdtype(y.dtype, np.integer):
        if y.ndim != 1:
            raise ExportError(f"class labels must be 1-D, got shape {y.shape}")
        if y.min(initial=0) < 0:
            raise ExportError("class labels must be non-negative")
        if num_classes is not None and y.size and int(y.max()) >= num_classes:
            warnings.warn(
                f"label {int(y.max())} is outside the declared {num_classes} classes",
                stacklevel=2)
        write_tbin(y.astype(np.uint32), out_labels, DTYPE_U32)
    elif np.issubdtype(y.dtype, np.floating):
        yf = y.astype(np.float32)
        if not np.isfinite(yf).all():
            raise ExportError("regression targets contain non-finite values")
        write_tbin(yf, out_labels, DTYPE_F32)
    else:
        raise ExportError(f"label dtype {y.dtype} is neither integer nor floating")

    write_tbin(xf, out_inputs, DTYPE_F32)

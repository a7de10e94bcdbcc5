"""Inference engine: deterministic and stochastic forward passes.

Activations are float32; every dot product, normalization, and reduction
accumulates in float64 before casting back.  Convolutions see [H, W, C]
activations and [out_c, in_c, kh, kw] kernels; 'same' padding puts the odd
zero column/row on the high side; flatten uses row-major order.

Stochastic passes realize dropout with inverted masks: a unit survives with
probability 1 - rate and is scaled by 1 / (1 - rate).  Mask bits come from
the counter stream in :mod:`prioritizer.rng`, keyed by (global seed, input
index, sample index, position of the layer in the model), so any scheduling
of inputs or samples reproduces identical bytes.  A unit is kept when its
uniform draw is >= rate; at rate 0 every unit is kept and the scale is
exactly 1.0, so a stochastic pass is bit-identical to a deterministic one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import SchemaError, ShapeError
from .formats import ModelManifest, layer_output_shape, same_padding_amounts, validate_model
from .rng import mix64, uniform_stream
from .tensor import Tensor, to_float32


@dataclass(frozen=True)
class ForwardMode:
    """How a single forward pass is run.

    ``deterministic`` passes treat dropout as identity.  Stochastic passes
    draw one mask per dropout layer from the key
    (global_seed, input_index, sample_index, layer position).
    """

    deterministic: bool = True
    global_seed: int = 42
    input_index: int = 0
    sample_index: int = 0


DETERMINISTIC = ForwardMode(deterministic=True)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax over the last axis, accumulated in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _dense(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    acc = kernel.astype(np.float64) @ x.reshape(-1).astype(np.float64)
    return to_float32(acc + bias.astype(np.float64))


def _conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int, padding: str) -> np.ndarray:
    h, w, _ = x.shape
    out_c, in_c, kh, kw = kernel.shape
    if padding == "same":
        (top, bottom) = same_padding_amounts(h, kh, stride)
        (left, right) = same_padding_amounts(w, kw, stride)
        x = np.pad(x, ((top, bottom), (left, right), (0, 0)))
        h, w = x.shape[0], x.shape[1]
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    xf = x.astype(np.float64)
    patches = np.empty((oh, ow, kh * kw * in_c), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            block = xf[i : i + oh * stride : stride, j : j + ow * stride : stride, :]
            patches[:, :, (i * kw + j) * in_c : (i * kw + j) * in_c + in_c] = block
    # kernel laid out to match patch order: (kh, kw, in_c) flattened per filter
    kmat = kernel.astype(np.float64).transpose(2, 3, 1, 0).reshape(kh * kw * in_c, out_c)
    acc = patches @ kmat + bias.astype(np.float64)
    return to_float32(acc)


def _maxpool2d(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    h, w, c = x.shape
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    out = np.full((oh, ow, c), -np.inf, dtype=np.float32)
    for i in range(kernel):
        for j in range(kernel):
            block = x[i : i + oh * stride : stride, j : j + ow * stride : stride, :]
            np.maximum(out, block, out=out)
    return out


def _batchnorm(x: np.ndarray, gamma, beta, mean, var, epsilon: float) -> np.ndarray:
    xf = x.astype(np.float64)
    scale = gamma.astype(np.float64) / np.sqrt(var.astype(np.float64) + float(epsilon))
    return to_float32(scale * (xf - mean.astype(np.float64)) + beta.astype(np.float64))


def _dropout_mask(size: int, rate: float, seed: int) -> np.ndarray:
    u = uniform_stream(seed, size)
    keep = (u >= rate).astype(np.float32)
    return keep * np.float32(1.0 / (1.0 - rate))


def forward(model: ModelManifest, x: Tensor, mode: ForwardMode = DETERMINISTIC,
            capture: tuple[str, ...] = ()) -> tuple[Tensor, dict[str, np.ndarray]]:
    """One forward pass; returns the output and any captured layer activations.

    ``capture`` names layers whose (flattened) outputs are recorded after the
    layer runs.  Unknown names raise, as does an input whose shape differs
    from the manifest's input_shape.
    """
    if tuple(x.shape) != tuple(model.input_shape):
        raise ShapeError(f"input shape {x.shape} differs from model input_shape {tuple(model.input_shape)}")
    known = {l.name for l in model.layers}
    for name in capture:
        if name not in known:
            raise SchemaError(f"no layer named {name!r}")
    x.require_finite("input")

    captured: dict[str, np.ndarray] = {}
    a = x.array
    for ordinal, layer in enumerate(model.layers):
        p = layer.params
        if layer.kind == "dense":
            a = _dense(a, model.weights[layer.weight_refs["kernel"]].array,
                       model.weights[layer.weight_refs["bias"]].array)
        elif layer.kind == "relu":
            a = np.maximum(a, np.float32(0.0))
        elif layer.kind == "softmax":
            a = softmax(a).astype(np.float32)
        elif layer.kind == "dropout":
            if not mode.deterministic:
                seed = mix64(mode.global_seed, mode.input_index, mode.sample_index, ordinal)
                mask = _dropout_mask(a.size, p["rate"], seed).reshape(a.shape)
                a = a * mask
        elif layer.kind == "flatten":
            a = a.reshape(-1)
        elif layer.kind == "conv2d":
            a = _conv2d(a, model.weights[layer.weight_refs["kernel"]].array,
                        model.weights[layer.weight_refs["bias"]].array,
                        p["stride"], p["padding"])
        elif layer.kind == "maxpool2d":
            a = _maxpool2d(a, p["kernel"], p["stride"])
        elif layer.kind == "batchnorm":
            a = _batchnorm(a, model.weights[layer.weight_refs["gamma"]].array,
                           model.weights[layer.weight_refs["beta"]].array,
                           model.weights[layer.weight_refs["moving_mean"]].array,
                           model.weights[layer.weight_refs["moving_var"]].array,
                           p["epsilon"])
        else:
            raise SchemaError(f"unknown layer kind {layer.kind!r}")
        if layer.name in capture:
            captured[layer.name] = a.reshape(-1).copy()

    out = Tensor(np.ascontiguousarray(a))
    out.require_finite("model output")
    return out, captured


def _pmap(fn, n: int, threads: int) -> list:
    """Apply ``fn`` to 0..n-1, results in index order regardless of scheduling."""
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def _check_batch(model: ModelManifest, inputs: Tensor) -> int:
    want = tuple(model.input_shape)
    if inputs.rank != len(want) + 1 or tuple(inputs.shape[1:]) != want:
        raise ShapeError(
            f"batch shape {inputs.shape} does not match [N, *{want}]"
        )
    return inputs.shape[0]


def predict_batch(model: ModelManifest, inputs: Tensor, mode: ForwardMode = DETERMINISTIC,
                  threads: int = 1) -> np.ndarray:
    """Row i holds the model output for input i; shape [N, *output_shape].

    Each row comes from the same single-input code path as :func:`forward`,
    so batching and thread count never change a byte of the result.
    """
    n = _check_batch(model, inputs)
    out_shape = model.output_shape()

    def run(i: int) -> np.ndarray:
        x = Tensor(inputs.array[i])
        y, _ = forward(model, x, replace(mode, input_index=i))
        return y.array

    rows = _pmap(run, n, threads)
    return np.stack(rows).reshape((n, *out_shape))


@dataclass(frozen=True)
class ActivationTraceSet:
    """Per-input activation vectors ([N, D]) plus the predicted class of each input."""

    traces: np.ndarray
    classes: np.ndarray

    def __post_init__(self):
        if self.traces.ndim != 2:
            raise ShapeError(f"traces must be [N, D], got {self.traces.shape}")
        if self.classes.shape != (self.traces.shape[0],):
            raise ShapeError(
                f"classes shape {self.classes.shape} does not match {self.traces.shape[0]} traces"
            )


def capture_traces(model: ModelManifest, inputs: Tensor, layer_names: tuple[str, ...],
                   threads: int = 1) -> ActivationTraceSet:
    """Deterministic activation traces at the named layers, concatenated in order.

    Classification models also report each input's predicted class (argmax of
    the final softmax); only classification models carry class semantics here.
    """
    if model.task != "classification":
        raise SchemaError("activation traces with classes require a classification model")
    if not layer_names:
        raise SchemaError("at least one layer name is required")
    n = _check_batch(model, inputs)

    def run(i: int) -> tuple[np.ndarray, int]:
        x = Tensor(inputs.array[i])
        y, captured = forward(model, x, DETERMINISTIC, capture=layer_names)
        trace = np.concatenate([captured[name] for name in layer_names])
        return trace, int(np.argmax(y.array))

    pairs = _pmap(run, n, threads)
    traces = np.stack([t for t, _ in pairs])
    classes = np.array([c for _, c in pairs], dtype=np.uint32)
    return ActivationTraceSet(traces=traces, classes=classes)


def default_trace_layer(model: ModelManifest) -> str:
    """Layer whose output feeds the final softmax (the deepest hidden activation)."""
    if model.task != "classification" or model.layers[-1].kind != "softmax":
        raise SchemaError("default trace layer requires a classification model ending in softmax")
    if len(model.layers) < 2:
        raise SchemaError("model has no layer before the softmax")
    return model.layers[-2].name


__all__ = [
    "ActivationTraceSet",
    "DETERMINISTIC",
    "ForwardMode",
    "capture_traces",
    "default_trace_layer",
    "forward",
    "predict_batch",
    "softmax",
]

"""Keras-to-manifest translation.

Supported layers: Dense, Conv2D (channels-last, square stride, no dilation or
groups), MaxPooling2D (valid padding, square window), BatchNormalization
(last axis), Dropout, Flatten, ReLU / Softmax / Activation('relu'|'softmax').
Fused activations on Dense/Conv2D are split into their own manifest layers.
Anything else raises UnsupportedLayerError naming the offender; silent
approximation would defeat the parity contract.

Math is never re-implemented here; tests verify each export by comparing the
consumer's predictions against Keras on a probe batch.
"""

from __future__ import annotations

import numpy as np

from .writers import ExportError, write_manifest, write_weights


class UnsupportedLayerError(ExportError):
    """Raised for any layer this bridge cannot express faithfully."""


def _array(variable, shape, fill) -> np.ndarray:
    if variable is None:
        return np.full(shape, fill, dtype=np.float32)
    return np.asarray(variable, dtype=np.float32)


def _activation_name(layer) -> str:
    fn = getattr(layer, "activation", None)
    if fn is None:
        return "linear"
    return getattr(fn, "__name__", str(fn))


def _refuse(layer, reason: str):
    raise UnsupportedLayerError(
        f"layer {layer.name!r} ({type(layer).__name__}): {reason}")


class _Emitter:
    def __init__(self):
        self.layers: list[dict] = []
        self.weights: dict[str, np.ndarray] = {}

    def emit(self, kind: str, name: str, params: dict | None = None,
             weights: dict[str, np.ndarray] | None = None):
        doc = {"kind": kind, "name": name}
        if params:
            doc.update(params)
        if weights:
            refs = {}
            for role, arr in weights.items():
                tensor_name = f"{name}/{role}"
                self.weights[tensor_name] = np.asarray(arr, dtype=np.float32)
                refs[role] = tensor_name
            doc["weights"] = refs
        self.layers.append(doc)

    def emit_activation(self, layer, act: str):
        if act == "linear":
            return
        if act == "relu":
            self.emit("relu", f"{layer.name}_relu")
        elif act == "softmax":
            self.emit("softmax", f"{layer.name}_softmax")
        else:
            _refuse(layer, f"activation {act!r} is not supported")


def _export_dense(layer, out: _Emitter):
    kernel = np.asarray(layer.kernel, dtype=np.float32)  # [in, out]
    if kernel.ndim != 2:
        _refuse(layer, f"kernel rank {kernel.ndim}")
    in_dim, out_dim = kernel.shape
    bias = _array(getattr(layer, "bias", None), (out_dim,), 0.0)
    out.emit("dense", layer.name,
             {"in_dim": int(in_dim), "out_dim": int(out_dim)},
             {"kernel": kernel.T.copy(), "bias": bias})
    out.emit_activation(layer, _activation_name(layer))


def _export_conv2d(layer, out: _Emitter):
    if getattr(layer, "data_format", "channels_last") != "channels_last":
        _refuse(layer, "only channels_last data_format is supported")
    if tuple(layer.dilation_rate) != (1, 1):
        _refuse(layer, f"dilation {tuple(layer.dilation_rate)} is not supported")
    if getattr(layer, "groups", 1) != 1:
        _refuse(layer, f"groups={layer.groups} is not supported")
    sh, sw = layer.strides
    if sh != sw:
        _refuse(layer, f"non-square stride {layer.strides}")
    if layer.padding not in ("same", "valid"):
        _refuse(layer, f"padding {layer.padding!r}")
    kernel = np.asarray(layer.kernel, dtype=np.float32)  # [kh, kw, in, out]
    kh, kw, in_c, out_c = kernel.shape
    bias = _array(getattr(layer, "bias", None), (out_c,), 0.0)
    out.emit("conv2d", layer.name,
             {"out_channels": int(out_c), "in_channels": int(in_c),
              "kernel_h": int(kh), "kernel_w": int(kw),
              "stride": int(sh), "padding": layer.padding},
             {"kernel": kernel.transpose(3, 2, 0, 1).copy(), "bias": bias})
    out.emit_activation(layer, _activation_name(layer))


def _export_maxpool(layer, out: _Emitter):
    if getattr(layer, "data_format", "channels_last") != "channels_last":
        _refuse(layer, "only channels_last data_format is supported")
    ph, pw = layer.pool_size
    sh, sw = layer.strides
    if ph != pw or sh != sw:
        _refuse(layer, f"non-square pooling {layer.pool_size}/{layer.strides}")
    if layer.padding != "valid":
        _refuse(layer, "only valid padding is supported for pooling")
    out.emit("maxpool2d", layer.name, {"kernel": int(ph), "stride": int(sh)})


def _export_batchnorm(layer, out: _Emitter):
    axis = layer.axis if isinstance(layer.axis, int) else list(layer.axis)[0]
    if axis != -1 and axis != len(layer.input.shape) - 1:
        _refuse(layer, f"normalization over axis {axis}; only the last axis is supported")
    mean = np.asarray(layer.moving_mean, dtype=np.float32)
    var = np.asarray(layer.moving_variance, dtype=np.float32)
    gamma = _array(layer.gamma if layer.scale else None, mean.shape, 1.0)
    beta = _array(layer.beta if layer.center else None, mean.shape, 0.0)
    out.emit("batchnorm", layer.name, {"epsilon": float(layer.epsilon)},
             {"gamma": gamma, "beta": beta, "moving_mean": mean, "moving_var": var})


def _export_relu_layer(layer, out: _Emitter):
    if getattr(layer, "max_value", None) is not None:
        _refuse(layer, "max_value clipping is not supported")
    if float(getattr(layer, "negative_slope", 0.0) or 0.0) != 0.0:
        _refuse(layer, "leaky slopes are not supported")
    if float(getattr(layer, "threshold", 0.0) or 0.0) != 0.0:
        _refuse(layer, "nonzero thresholds are not supported")
    out.emit("relu", layer.name)


def _export_softmax_layer(layer, out: _Emitter):
    if getattr(layer, "axis", -1) != -1:
        _refuse(layer, "softmax over a non-last axis is not supported")
    out.emit("softmax", layer.name)


def export_model(model, out_manifest, out_weights) -> None:
    """Write a Keras Sequential model as manifest JSON plus NNWB weights.

    The task is inferred from the tail: models ending in softmax export as
    classification, all others as regression.
    """
    import keras

    if not isinstance(model, keras.Sequential):
        raise UnsupportedLayerError(
            f"model {model.name!r} is not Sequential; branching topologies are not supported")
    if not model.built:
        raise ExportError(f"model {model.name!r} has never been built; no weights to export")

    input_shape = model.input_shape
    if input_shape is None or len(input_shape) < 2 or any(d is None for d in input_shape[1:]):
        raise ExportError(f"model {model.name!r} input shape {input_shape} is not fully known")

    out = _Emitter()
    for layer in model.layers:
        cls = type(layer).__name__
        if cls == "InputLayer":
            continue
        elif cls == "Dense":
            _export_dense(layer, out)
        elif cls == "Conv2D":
            _export_conv2d(layer, out)
        elif cls == "MaxPooling2D":
            _export_maxpool(layer, out)
        elif cls == "BatchNormalization":
            _export_batchnorm(layer, out)
        elif cls == "Dropout":
            rate = float(layer.rate)
            if not (0.0 <= rate < 1.0):
                _refuse(layer, f"dropout rate {rate} outside [0, 1)")
            out.emit("dropout", layer.name, {"rate": rate})
        elif cls == "Flatten":
            if getattr(layer, "data_format", "channels_last") != "channels_last":
                _refuse(layer, "only channels_last flattening is supported")
            out.emit("flatten", layer.name)
        elif cls == "ReLU":
            _export_relu_layer(layer, out)
        elif cls == "Softmax":
            _export_softmax_layer(layer, out)
        elif cls == "Activation":
            out.emit_activation(layer, _activation_name(layer))
        else:
            _refuse(layer, "no mapping for this layer type")

    if not out.layers:
        raise ExportError(f"model {model.name!r} exported no layers")
    task = "classification" if out.layers[-1]["kind"] == "softmax" else "regression"
    write_manifest(model.name, task, input_shape[1:], out.layers, out_manifest)
    write_weights(out.weights, out_weights)

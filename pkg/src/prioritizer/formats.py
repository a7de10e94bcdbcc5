"""On-disk formats: JSON model manifests, NNWB weight blobs, TBIN tensor files.

All multi-byte integers are little-endian.  Both binary formats are bit-exact:
saving a loaded structure reproduces the original bytes.

NNWB weights blob::

    magic "NNWB" | u32 version=1 | u32 tensor_count
    tensor_count table entries:
        u32 name_len | UTF-8 name | u8 dtype (0 = f32) | u8 rank
        u32 dims[rank] | u64 byte_offset | u64 byte_len
    raw little-endian float32 payloads

``byte_offset`` is relative to the start of the payload section, which begins
immediately after the last table entry.

TBIN tensor file::

    magic "TBIN" | u32 version=1 | u8 dtype (0 = f32, 1 = u32) | u8 rank
    u32 dims[rank] | raw little-endian payload

Dataset files are f32 with the sample count as the first dimension.  Label
files are u32 (class indices) or f32 (regression targets of shape [N, out]).

Model manifest JSON::

    {"name": ..., "task": "classification" | "regression",
     "input_shape": [...],
     "layers": [{"kind": ..., "name": ..., <kind params>,
                 "weights": {role: tensor-name}}, ...]}

Layer kinds, their parameters and weight roles:

==========  =======================================================  =========================================
kind        params                                                   weight roles (shape)
==========  =======================================================  =========================================
dense       in_dim, out_dim                                          kernel [out,in], bias [out]
relu        --                                                       --
softmax     --                                                       --
dropout     rate in [0,1)                                            --
flatten     --                                                       --
conv2d      out_channels, in_channels, kernel_h, kernel_w,           kernel [out_c,in_c,kh,kw], bias [out_c]
            stride, padding in {same, valid}
maxpool2d   kernel, stride                                           --
batchnorm   epsilon                                                  gamma, beta, moving_mean, moving_var,
                                                                     each [channels]
==========  =======================================================  =========================================

Activations flow as [H, W, C]; batchnorm normalizes the last (channel) axis
with stored inference-time moving statistics.  Classification models end in
softmax, regression models must not.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    MissingWeightError,
    NonFiniteError,
    SchemaError,
    ShapeError,
)
from .tensor import Tensor

_NNWB_MAGIC = b"NNWB"
_TBIN_MAGIC = b"TBIN"
_VERSION = 1
_DTYPE_F32 = 0
_DTYPE_U32 = 1

LAYER_KINDS = (
    "dense",
    "relu",
    "softmax",
    "dropout",
    "flatten",
    "conv2d",
    "maxpool2d",
    "batchnorm",
)

# kind -> {param name: validator}
_LAYER_PARAMS = {
    "dense": ("in_dim", "out_dim"),
    "relu": (),
    "softmax": (),
    "dropout": ("rate",),
    "flatten": (),
    "conv2d": ("out_channels", "in_channels", "kernel_h", "kernel_w", "stride", "padding"),
    "maxpool2d": ("kernel", "stride"),
    "batchnorm": ("epsilon",),
}

# kind -> required weight roles
_LAYER_WEIGHT_ROLES = {
    "dense": ("kernel", "bias"),
    "conv2d": ("kernel", "bias"),
    "batchnorm": ("gamma", "beta", "moving_mean", "moving_var"),
}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str
    params: dict = field(default_factory=dict)
    weight_refs: dict = field(default_factory=dict)


@dataclass
class ModelManifest:
    name: str
    task: str  # "classification" | "regression"
    input_shape: tuple[int, ...]
    layers: list[LayerSpec]
    weights: dict[str, Tensor]

    def has_dropout(self) -> bool:
        return any(l.kind == "dropout" for l in self.layers)

    def layer(self, name: str) -> LayerSpec:
        for l in self.layers:
            if l.name == name:
                return l
        raise SchemaError(f"no layer named {name!r}")

    def output_shape(self) -> tuple[int, ...]:
        shape = self.input_shape
        for layer in self.layers:
            shape = layer_output_shape(layer, shape)
        return shape


def _check_pos_int(layer_name: str, key: str, value) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise SchemaError(f"layer {layer_name!r}: {key} must be a positive integer, got {value!r}")
    return value


def _validate_layer_params(layer: LayerSpec) -> None:
    if layer.kind not in LAYER_KINDS:
        raise SchemaError(f"unknown layer kind {layer.kind!r} (layer {layer.name!r})")
    expected = _LAYER_PARAMS[layer.kind]
    extra = set(layer.params) - set(expected)
    missing = set(expected) - set(layer.params)
    if extra:
        raise SchemaError(f"layer {layer.name!r}: unexpected parameters {sorted(extra)}")
    if missing:
        raise SchemaError(f"layer {layer.name!r}: missing parameters {sorted(missing)}")
    p = layer.params
    if layer.kind == "dense":
        _check_pos_int(layer.name, "in_dim", p["in_dim"])
        _check_pos_int(layer.name, "out_dim", p["out_dim"])
    elif layer.kind == "dropout":
        rate = p["rate"]
        if not isinstance(rate, (int, float)) or isinstance(rate, bool) or not (0.0 <= rate < 1.0):
            raise SchemaError(f"layer {layer.name!r}: dropout rate must satisfy 0 <= p < 1, got {rate!r}")
    elif layer.kind == "conv2d":
        for key in ("out_channels", "in_channels", "kernel_h", "kernel_w", "stride"):
            _check_pos_int(layer.name, key, p[key])
        if p["padding"] not in ("same", "valid"):
            raise SchemaError(f"layer {layer.name!r}: padding must be 'same' or 'valid', got {p['padding']!r}")
    elif layer.kind == "maxpool2d":
        _check_pos_int(layer.name, "kernel", p["kernel"])
        _check_pos_int(layer.name, "stride", p["stride"])
    elif layer.kind == "batchnorm":
        eps = p["epsilon"]
        if not isinstance(eps, (int, float)) or isinstance(eps, bool) or eps <= 0:
            raise SchemaError(f"layer {layer.name!r}: epsilon must be positive, got {eps!r}")

    roles = _LAYER_WEIGHT_ROLES.get(layer.kind, ())
    if set(layer.weight_refs) != set(roles):
        raise SchemaError(
            f"layer {layer.name!r}: weight roles must be {sorted(roles)}, got {sorted(layer.weight_refs)}"
        )


def conv_output_size(in_size: int, kernel: int, stride: int, padding: str) -> int:
    if padding == "same":
        return -(-in_size // stride)  # ceil
    return (in_size - kernel) // stride + 1


def same_padding_amounts(in_size: int, kernel: int, stride: int) -> tuple[int, int]:
    """Zero-padding (low, high) for 'same'; the extra unit goes on the high side."""
    out = conv_output_size(in_size, kernel, stride, "same")
    total = max((out - 1) * stride + kernel - in_size, 0)
    lo = total // 2
    return lo, total - lo


def layer_output_shape(layer: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Shape produced by ``layer`` on input of ``in_shape``; raises on a chain break."""
    kind, name, p = layer.kind, layer.name, layer.params
    if kind == "dense":
        if in_shape != (p["in_dim"],):
            raise ShapeError(f"layer {name!r}: expects input shape ({p['in_dim']},), got {in_shape}")
        return (p["out_dim"],)
    if kind in ("relu", "dropout"):
        return in_shape
    if kind == "softmax":
        if len(in_shape) != 1:
            raise ShapeError(f"layer {name!r}: softmax expects a rank-1 input, got {in_shape}")
        return in_shape
    if kind == "flatten":
        return (int(np.prod(in_shape)),)
    if kind == "conv2d":
        if len(in_shape) != 3:
            raise ShapeError(f"layer {name!r}: conv2d expects [H, W, C] input, got {in_shape}")
        h, w, c = in_shape
        if c != p["in_channels"]:
            raise ShapeError(f"layer {name!r}: expects {p['in_channels']} input channels, got {c}")
        if p["padding"] == "valid" and (h < p["kernel_h"] or w < p["kernel_w"]):
            raise ShapeError(f"layer {name!r}: kernel larger than input {in_shape} with valid padding")
        oh = conv_output_size(h, p["kernel_h"], p["stride"], p["padding"])
        ow = conv_output_size(w, p["kernel_w"], p["stride"], p["padding"])
        return (oh, ow, p["out_channels"])
    if kind == "maxpool2d":
        if len(in_shape) != 3:
            raise ShapeError(f"layer {name!r}: maxpool2d expects [H, W, C] input, got {in_shape}")
        h, w, c = in_shape
        if h < p["kernel"] or w < p["kernel"]:
            raise ShapeError(f"layer {name!r}: pool kernel larger than input {in_shape}")
        oh = (h - p["kernel"]) // p["stride"] + 1
        ow = (w - p["kernel"]) // p["stride"] + 1
        return (oh, ow, c)
    if kind == "batchnorm":
        return in_shape
    raise SchemaError(f"unknown layer kind {kind!r}")


def _expected_weight_shapes(layer: LayerSpec, in_shape: tuple[int, ...]) -> dict[str, tuple[int, ...]]:
    p = layer.params
    if layer.kind == "dense":
        return {"kernel": (p["out_dim"], p["in_dim"]), "bias": (p["out_dim"],)}
    if layer.kind == "conv2d":
        return {
            "kernel": (p["out_channels"], p["in_channels"], p["kernel_h"], p["kernel_w"]),
            "bias": (p["out_channels"],),
        }
    if layer.kind == "batchnorm":
        channels = in_shape[-1]
        return {role: (channels,) for role in ("gamma", "beta", "moving_mean", "moving_var")}
    return {}


def validate_model(model: ModelManifest) -> None:
    """Full structural validation; every loader and saver goes through this."""
    if model.task not in ("classification", "regression"):
        raise SchemaError(f"task must be 'classification' or 'regression', got {model.task!r}")
    if not model.layers:
        raise SchemaError("model must declare at least one layer")
    if not model.input_shape or any(
        not isinstance(d, int) or isinstance(d, bool) or d <= 0 for d in model.input_shape
    ):
        raise SchemaError(f"input_shape must be positive integers, got {model.input_shape!r}")

    names = [l.name for l in model.layers]
    if len(set(names)) != len(names):
        raise SchemaError("layer names must be unique")

    shape = tuple(model.input_shape)
    for layer in model.layers:
        _validate_layer_params(layer)
        for role, tensor_name in layer.weight_refs.items():
            if tensor_name not in model.weights:
                raise MissingWeightError(
                    f"layer {layer.name!r}: weight {role!r} references missing tensor {tensor_name!r}"
                )
        expected = _expected_weight_shapes(layer, shape)
        for role, want in expected.items():
            got = model.weights[layer.weight_refs[role]].shape
            if got != want:
                raise ShapeError(
                    f"layer {layer.name!r}: weight {role!r} must have shape {want}, blob has {got}"
                )
        shape = layer_output_shape(layer, shape)

    for name, tensor in model.weights.items():
        if not np.isfinite(tensor.array).all():
            raise NonFiniteError(f"weight tensor {name!r} contains non-finite values")

    last = model.layers[-1].kind
    if model.task == "classification" and last != "softmax":
        raise SchemaError("classification models must end in a softmax layer")
    if model.task == "regression" and last == "softmax":
        raise SchemaError("regression models must not end in a softmax layer")


# ---------------------------------------------------------------------------
# NNWB weights blob


def _write_nnwb(weights: dict[str, Tensor], path) -> None:
    table = bytearray()
    payload = bytearray()
    offset = 0
    for name, tensor in weights.items():
        raw = tensor.array.astype("<f4", copy=False).tobytes()
        encoded = name.encode("utf-8")
        table += struct.pack("<I", len(encoded)) + encoded
        table += struct.pack("<BB", _DTYPE_F32, tensor.rank)
        table += struct.pack(f"<{tensor.rank}I", *tensor.shape)
        table += struct.pack("<QQ", offset, len(raw))
        payload += raw
        offset += len(raw)
    header = _NNWB_MAGIC + struct.pack("<II", _VERSION, len(weights))
    Path(path).write_bytes(header + bytes(table) + bytes(payload))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.path}: truncated file")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_nnwb(path) -> dict[str, Tensor]:
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != _NNWB_MAGIC:
        raise FormatError(f"{path}: bad magic (expected NNWB)")
    (version, count) = r.unpack("<II")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    entries = []
    for _ in range(count):
        (name_len,) = r.unpack("<I")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: tensor name is not valid UTF-8") from exc
        dtype, rank = r.unpack("<BB")
        if dtype != _DTYPE_F32:
            raise FormatError(f"{path}: tensor {name!r} has unsupported dtype {dtype}")
        if rank < 1:
            raise FormatError(f"{path}: tensor {name!r} has rank 0")
        dims = r.unpack(f"<{rank}I")
        byte_offset, byte_len = r.unpack("<QQ")
        if byte_len != 4 * math.prod(dims):
            raise FormatError(f"{path}: tensor {name!r} byte length disagrees with dims {dims}")
        entries.append((name, dims, byte_offset, byte_len))

    payload = r.blob[r.pos :]
    weights: dict[str, Tensor] = {}
    for name, dims, byte_offset, byte_len in entries:
        if name in weights:
            raise FormatError(f"{path}: duplicate tensor name {name!r}")
        if byte_offset + byte_len > len(payload):
            raise FormatError(f"{path}: tensor {name!r} payload is truncated")
        flat = np.frombuffer(payload, dtype="<f4", count=byte_len // 4, offset=byte_offset)
        if not np.isfinite(flat).all():
            raise NonFiniteError(f"{path}: tensor {name!r} contains non-finite values")
        weights[name] = Tensor(flat.reshape(dims).copy())
    return weights


# ---------------------------------------------------------------------------
# TBIN tensor files


def _write_tbin(arr: np.ndarray, dtype_code: int, path) -> None:
    wire = "<f4" if dtype_code == _DTYPE_F32 else "<u4"
    header = _TBIN_MAGIC + struct.pack("<IBB", _VERSION, dtype_code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(arr).astype(wire, copy=False).tobytes())


def _read_tbin(path) -> tuple[int, np.ndarray]:
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != _TBIN_MAGIC:
        raise FormatError(f"{path}: bad magic (expected TBIN)")
    version, dtype, rank = r.unpack("<IBB")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype not in (_DTYPE_F32, _DTYPE_U32):
        raise FormatError(f"{path}: unsupported dtype {dtype}")
    if rank < 1:
        raise FormatError(f"{path}: rank must be >= 1")
    dims = r.unpack(f"<{rank}I")
    if any(d <= 0 for d in dims):
        raise FormatError(f"{path}: dimensions must be positive, got {dims}")
    count = math.prod(dims)
    payload = r.blob[r.pos :]
    if len(payload) != 4 * count:
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, shape {dims} needs {4 * count}"
        )
    wire = "<f4" if dtype == _DTYPE_F32 else "<u4"
    return dtype, np.frombuffer(payload, dtype=wire, count=count).reshape(dims).copy()


def save_tensor_file(tensor: Tensor, path) -> None:
    _write_tbin(tensor.array, _DTYPE_F32, path)


def load_tensor_file(path) -> Tensor:
    dtype, arr = _read_tbin(path)
    if dtype != _DTYPE_F32:
        raise FormatError(f"{path}: holds u32 data; use load_index_file")
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{path}: contains non-finite values")
    return Tensor(arr)


def save_index_file(values, path) -> None:
    """Write class indices / selections as a u32 TBIN file."""
    arr = np.asarray(values)
    if arr.ndim < 1:
        arr = arr.reshape(-1)
    if not np.issubdtype(arr.dtype, np.integer) or arr.min(initial=0) < 0:
        raise FormatError("index files require non-negative integers")
    if arr.size and int(arr.max()) > 0xFFFFFFFF:
        raise FormatError("index value does not fit in u32")
    _write_tbin(arr.astype(np.uint32), _DTYPE_U32, path)


def load_index_file(path) -> np.ndarray:
    dtype, arr = _read_tbin(path)
    if dtype != _DTYPE_U32:
        raise FormatError(f"{path}: holds f32 data; use load_tensor_file")
    return arr


# ---------------------------------------------------------------------------
# Manifest JSON


def _layer_to_json(layer: LayerSpec) -> dict:
    doc: dict = {"kind": layer.kind, "name": layer.name}
    for key in _LAYER_PARAMS.get(layer.kind, ()):
        doc[key] = layer.params[key]
    if layer.weight_refs:
        doc["weights"] = dict(layer.weight_refs)
    return doc


def _layer_from_json(doc, position: int) -> LayerSpec:
    if not isinstance(doc, dict):
        raise SchemaError(f"layers[{position}] must be an object")
    kind = doc.get("kind")
    name = doc.get("name")
    if kind not in LAYER_KINDS:
        raise SchemaError(f"layers[{position}]: unknown kind {kind!r}")
    if not isinstance(name, str) or not name:
        raise SchemaError(f"layers[{position}]: name must be a non-empty string")
    weights = doc.get("weights", {})
    if not isinstance(weights, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in weights.items()
    ):
        raise SchemaError(f"layer {name!r}: weights must map role names to tensor names")
    params = {k: v for k, v in doc.items() if k not in ("kind", "name", "weights")}
    return LayerSpec(kind=kind, name=name, params=params, weight_refs=dict(weights))


def save_model(model: ModelManifest, manifest_path, weights_path) -> None:
    """Persist a validated model; loading the pair reproduces it bit-exactly."""
    validate_model(model)
    doc = {
        "name": model.name,
        "task": model.task,
        "input_shape": list(model.input_shape),
        "layers": [_layer_to_json(l) for l in model.layers],
    }
    Path(manifest_path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    _write_nnwb(model.weights, weights_path)


def load_model(manifest_path, weights_path) -> ModelManifest:
    try:
        doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{manifest_path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{manifest_path}: manifest must be a JSON object")
    for key in ("name", "task", "input_shape", "layers"):
        if key not in doc:
            raise SchemaError(f"{manifest_path}: missing key {key!r}")
    if not isinstance(doc["name"], str):
        raise SchemaError(f"{manifest_path}: name must be a string")
    if not isinstance(doc["input_shape"], list):
        raise SchemaError(f"{manifest_path}: input_shape must be a list")
    if not isinstance(doc["layers"], list) or not doc["layers"]:
        raise SchemaError(f"{manifest_path}: layers must be a non-empty list")

    layers = [_layer_from_json(entry, i) for i, entry in enumerate(doc["layers"])]
    weights = _read_nnwb(weights_path)
    model = ModelManifest(
        name=doc["name"],
        task=doc["task"],
        input_shape=tuple(doc["input_shape"]) if all(
            isinstance(d, int) and not isinstance(d, bool) for d in doc["input_shape"]
        ) else (_raise_bad_shape(manifest_path, doc["input_shape"])),
        layers=layers,
        weights=weights,
    )
    validate_model(model)
    return model


def _raise_bad_shape(path, value):
    raise SchemaError(f"{path}: input_shape must be a list of integers, got {value!r}")

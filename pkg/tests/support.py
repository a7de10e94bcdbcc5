"""Shared model builders and the acceptance result sink.

Lives outside conftest.py so test modules can import it by a basename that is
unique across every collected test directory.
"""

import numpy as np

from prioritizer import LayerSpec, ModelManifest, Tensor

ACCEPTANCE_RESULTS: list[str] = []


def dense_layer(name, in_dim, out_dim):
    return LayerSpec("dense", name, {"in_dim": in_dim, "out_dim": out_dim},
                     {"kernel": f"{name}/kernel", "bias": f"{name}/bias"})


def dense_weights(rng, name, in_dim, out_dim, scale=1.0):
    return {
        f"{name}/kernel": Tensor(rng.normal(scale=scale, size=(out_dim, in_dim)).astype(np.float32)),
        f"{name}/bias": Tensor(rng.normal(scale=scale, size=(out_dim,)).astype(np.float32)),
    }


def build_mlp(rng, in_dim=6, hidden=12, classes=4, dropout_rate=None, name="mlp"):
    """Classification MLP: dense, relu, [dropout], dense, softmax."""
    layers = [dense_layer("fc1", in_dim, hidden), LayerSpec("relu", "act1")]
    if dropout_rate is not None:
        layers.append(LayerSpec("dropout", "drop1", {"rate": dropout_rate}))
    layers += [dense_layer("fc2", hidden, classes), LayerSpec("softmax", "probs")]
    weights = {}
    weights.update(dense_weights(rng, "fc1", in_dim, hidden))
    weights.update(dense_weights(rng, "fc2", hidden, classes))
    return ModelManifest(name=name, task="classification", input_shape=(in_dim,),
                         layers=layers, weights=weights)


def build_regressor(rng, in_dim=6, hidden=12, out_dim=2, dropout_rate=None, name="reg"):
    """Regression MLP: dense, relu, [dropout], dense."""
    layers = [dense_layer("fc1", in_dim, hidden), LayerSpec("relu", "act1")]
    if dropout_rate is not None:
        layers.append(LayerSpec("dropout", "drop1", {"rate": dropout_rate}))
    layers.append(dense_layer("fc2", hidden, out_dim))
    weights = {}
    weights.update(dense_weights(rng, "fc1", in_dim, hidden))
    weights.update(dense_weights(rng, "fc2", hidden, out_dim))
    return ModelManifest(name=name, task="regression", input_shape=(in_dim,),
                         layers=layers, weights=weights)


def build_convnet(rng, h=8, w=8, c=1, classes=3, name="cnn"):
    """conv2d(same), relu, maxpool2d, conv2d(valid), relu, flatten, dense, softmax."""
    conv1 = LayerSpec("conv2d", "conv1",
                      {"out_channels": 4, "in_channels": c, "kernel_h": 3, "kernel_w": 3,
                       "stride": 1, "padding": "same"},
                      {"kernel": "conv1/kernel", "bias": "conv1/bias"})
    pool = LayerSpec("maxpool2d", "pool1", {"kernel": 2, "stride": 2})
    conv2 = LayerSpec("conv2d", "conv2",
                      {"out_channels": 6, "in_channels": 4, "kernel_h": 2, "kernel_w": 2,
                       "stride": 1, "padding": "valid"},
                      {"kernel": "conv2/kernel", "bias": "conv2/bias"})
    oh, ow = h // 2 - 1, w // 2 - 1
    flat_dim = oh * ow * 6
    layers = [
        conv1, LayerSpec("relu", "act1"), pool,
        conv2, LayerSpec("relu", "act2"),
        LayerSpec("flatten", "flat"),
        dense_layer("fc", flat_dim, classes),
        LayerSpec("softmax", "probs"),
    ]
    weights = {
        "conv1/kernel": Tensor(rng.normal(scale=0.5, size=(4, c, 3, 3)).astype(np.float32)),
        "conv1/bias": Tensor(rng.normal(scale=0.5, size=(4,)).astype(np.float32)),
        "conv2/kernel": Tensor(rng.normal(scale=0.5, size=(6, 4, 2, 2)).astype(np.float32)),
        "conv2/bias": Tensor(rng.normal(scale=0.5, size=(6,)).astype(np.float32)),
    }
    weights.update(dense_weights(rng, "fc", flat_dim, classes, scale=0.5))
    return ModelManifest(name=name, task="classification", input_shape=(h, w, c),
                         layers=layers, weights=weights)

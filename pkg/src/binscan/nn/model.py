"""The two-block convolutional classifier and its parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelNotLoaded, ShapeMismatch
from ..imagizer import PLANE_SIDE
from ..rng import STREAM_INIT, Rng
from . import layers

# parameter names in their fixed serialization order
PARAM_ORDER = ("conv1.W", "conv1.b", "conv2.W", "conv2.b", "fc.W", "fc.b", "out.W", "out.b")


@dataclass(frozen=True)
class ConvSpec:
    kernel: int
    stride: int
    depth: int
    padding: str = "same"


@dataclass(frozen=True)
class PoolSpec:
    kernel: int = 2
    stride: int = 2


@dataclass(frozen=True)
class ModelSpec:
    classes: int = 3
    input_side: int = PLANE_SIDE
    conv1: ConvSpec = ConvSpec(kernel=3, stride=1, depth=32)
    pool1: PoolSpec = PoolSpec()
    conv2: ConvSpec = ConvSpec(kernel=3, stride=1, depth=72)
    pool2: PoolSpec = PoolSpec()
    fc_units: int = 256
    activation: str = "relu"

    def __post_init__(self):
        if self.classes not in (2, 3):
            raise ValueError(f"classes must be 2 or 3, got {self.classes}")

    @property
    def conv_nodes(self) -> int:
        return self.conv1.depth + self.conv2.depth

    def shape_pipeline(self) -> list[tuple[int, ...]]:
        s = self.input_side
        shapes = [(s, s, 1), (s, s, self.conv1.depth)]
        s //= self.pool1.stride
        shapes += [(s, s, self.conv1.depth), (s, s, self.conv2.depth)]
        s //= self.pool2.stride
        shapes += [(s, s, self.conv2.depth), (s * s * self.conv2.depth,), (self.fc_units,), (self.classes,)]
        return shapes

    @property
    def flatten_size(self) -> int:
        return self.shape_pipeline()[5][0]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        k1, k2 = self.conv1.kernel, self.conv2.kernel
        d1, d2 = self.conv1.depth, self.conv2.depth
        return {
            "conv1.W": (k1, k1, 1, d1),
            "conv1.b": (d1,),
            "conv2.W": (k2, k2, d1, d2),
            "conv2.b": (d2,),
            "fc.W": (self.flatten_size, self.fc_units),
            "fc.b": (self.fc_units,),
            "out.W": (self.fc_units, self.classes),
            "out.b": (self.classes,),
        }

    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in self.param_shapes().values())

    def describe(self) -> list[str]:
        return [
            f"convolution layer(kernel={self.conv1.kernel}, stride={self.conv1.stride}, depth={self.conv1.depth})",
            f"max pooling layer(kernel={self.pool1.kernel}, stride={self.pool1.stride})",
            f"convolution layer(kernel={self.conv2.kernel}, stride={self.conv2.stride}, depth={self.conv2.depth})",
            f"max pooling layer(kernel={self.pool2.kernel}, stride={self.pool2.stride})",
            f"fully connected layer(size={self.fc_units})",
            "softmax classifier",
        ]


def _fan_in(shape: tuple[int, ...]) -> int:
    return int(np.prod(shape[:-1]))


@dataclass
class Network:
    """Table-driven CNN: conv-relu-pool, conv-relu-pool, fc-relu, softmax.

    ``params`` is None until the network is initialised or loaded.
    """

    spec: ModelSpec
    params: dict[str, np.ndarray] | None = None
    seed: int = 0
    normalized: bool = True
    digest: str | None = field(default=None, compare=False)

    @classmethod
    def initialize(cls, spec: ModelSpec, seed: int) -> "Network":
        """He-normal weights (std sqrt(2 / fan_in)), zero biases."""
        rng = Rng.derive(seed, STREAM_INIT)
        params = {}
        for name, shape in spec.param_shapes().items():
            if name.endswith(".b"):
                params[name] = np.zeros(shape)
            else:
                std = np.sqrt(2.0 / _fan_in(shape))
                params[name] = rng.normal_array(int(np.prod(shape))).reshape(shape) * std
        net = cls(spec=spec, params=params, seed=seed)
        net.check_shapes()
        return net

    def check_shapes(self):
        if self.params is None:
            raise ModelNotLoaded("network has no parameters")
        expected = self.spec.param_shapes()
        if list(self.params) != list(PARAM_ORDER):
            raise ShapeMismatch(f"parameter names {list(self.params)} != {list(PARAM_ORDER)}")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ShapeMismatch(f"{name} has shape {self.params[name].shape}, expected {shape}")

    def param_count(self) -> int:
        if self.params is None:
            raise ModelNotLoaded("network has no parameters")
        return sum(p.size for p in self.params.values())

    def forward_batch(self, x: np.ndarray, keep_cache: bool = False):
        """Logits for a batch of planes (B, 64, 64); optionally the backward cache."""
        p = self.params
        if p is None:
            raise ModelNotLoaded("network has no parameters")
        side = self.spec.input_side
        if x.ndim != 3 or x.shape[1:] != (side, side):
            raise ShapeMismatch(f"expected (B, {side}, {side}) planes, got {x.shape}")
        h = x[..., np.newaxis]
        # relu and max pooling commute exactly (relu is monotone and the
        # relu mask zeroes the gradient of any window whose max is <= 0), so
        # relu runs on the 4x smaller pooled map.
        h, c1 = layers.conv2d_forward(h, p["conv1.W"], p["conv1.b"])
        h, q1 = layers.maxpool_forward(h)
        h, r1 = layers.relu_forward(h)
        h, c2 = layers.conv2d_forward(h, p["conv2.W"], p["conv2.b"])
        h, q2 = layers.maxpool_forward(h)
        h, r2 = layers.relu_forward(h)
        pooled_shape = h.shape
        h = h.reshape(h.shape[0], -1)
        h, f1 = layers.dense_forward(h, p["fc.W"], p["fc.b"])
        h, r3 = layers.relu_forward(h)
        logits, f2 = layers.dense_forward(h, p["out.W"], p["out.b"])
        if not keep_cache:
            return logits, None
        return logits, (c1, r1, q1, c2, r2, q2, pooled_shape, f1, r3, f2)

    def backward(self, grad_logits: np.ndarray, cache) -> dict[str, np.ndarray]:
        c1, r1, q1, c2, r2, q2, pooled_shape, f1, r3, f2 = cache
        grads = {}
        g, grads["out.W"], grads["out.b"] = layers.dense_backward(grad_logits, f2)
        g = layers.relu_backward(g, r3)
        g, grads["fc.W"], grads["fc.b"] = layers.dense_backward(g, f1)
        g = g.reshape(pooled_shape)
        g = layers.relu_backward(g, r2)
        g = layers.maxpool_backward(g, q2)
        g, grads["conv2.W"], grads["conv2.b"] = layers.conv2d_backward(g, c2)
        g = layers.relu_backward(g, r1)
        g = layers.maxpool_backward(g, q1)
        _, grads["conv1.W"], grads["conv1.b"] = layers.conv2d_backward(g, c1, need_input_grad=False)
        return {name: grads[name] for name in PARAM_ORDER}

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray):
        logits, cache = self.forward_batch(x, keep_cache=True)
        loss, probs, grad_logits = layers.softmax_xent(logits, labels)
        return loss, probs, self.backward(grad_logits, cache)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward_batch(x)
        return layers.softmax(logits)


def forward(model: Network, plane: np.ndarray, benign_index: int = 0) -> tuple[np.ndarray, float]:
    """Class probabilities for one plane and its suspiciousness score 1 - P(benign)."""
    probs = model.predict_proba(plane[np.newaxis])[0]
    score = min(1.0, max(0.0, 1.0 - float(probs[benign_index])))
    return probs, score


def classify(probs: np.ndarray) -> int:
    """Argmax with lowest-index tie-break."""
    return int(np.argmax(probs))

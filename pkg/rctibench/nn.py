"""Module for the minimal neural-network engine.

Dense float64 arrays carry every activation, gradient and image. A model is an
immutable snapshot: ``sgd_step`` returns a new model and never touches the
arrays of the old one, so models can be handed between threads freely.
"""
from dataclasses import dataclass, field, replace
import logging
import math
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

logger = logging.getLogger(__name__)

Params = Tuple[np.ndarray, ...]


class ShapeMismatchError(ValueError):
    """Array shapes do not compose with a layer or its parameters."""


class NumericOverflowError(ArithmeticError):
    """A loss or activation became NaN or infinite."""


class Batch(NamedTuple):
    """Images ``[n, 1, 28, 28]`` in [0, 1] with their class labels."""

    images: np.ndarray
    labels: np.ndarray


class LossAndGrads(NamedTuple):
    """Mean cross-entropy with its parameter and input gradients."""

    loss: float
    param_grads: List[Params]
    input_grads: np.ndarray


class Layer:
    """Base layer: no parameters, identity shape."""

    kind = "Layer"

    @property
    def params(self) -> Params:
        return ()

    def with_params(self, params: Params) -> "Layer":
        if params:
            raise ShapeMismatchError(f"{self.kind} has no parameters")
        return self

    def check_input(self, shape: Tuple[int, ...]) -> None:
        """Raise ValueError when an input of this shape does not compose."""

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, grad: np.ndarray, cache) -> Tuple[np.ndarray, Params]:
        raise NotImplementedError


def _check_same_shapes(kind: str, old: Params, new: Params) -> Params:
    if len(old) != len(new) or any(a.shape != np.shape(b) for a, b in zip(old, new)):
        raise ShapeMismatchError(
            f"{kind} expects parameter shapes {[a.shape for a in old]}, "
            f"got {[np.shape(b) for b in new]}"
        )
    return tuple(np.asarray(b, dtype=np.float64) for b in new)


@dataclass(frozen=True, eq=False)
class Dense(Layer):
    """Affine layer ``y = x @ weight + bias``; weight is ``[in_dim, out_dim]``."""

    in_dim: int
    out_dim: int
    weight: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)

    kind = "Dense"

    @property
    def params(self) -> Params:
        return (self.weight, self.bias)

    def with_params(self, params: Params) -> "Dense":
        weight, bias = _check_same_shapes(self.kind, self.params, params)
        return replace(self, weight=weight, bias=bias)

    def check_input(self, shape):
        if len(shape) != 2 or shape[1] != self.in_dim:
            raise ValueError(f"expects [n, {self.in_dim}], got {list(shape)}")

    def forward(self, x):
        return x @ self.weight + self.bias, x

    def backward(self, grad, cache):
        x = cache
        return grad @ self.weight.T, (x.T @ grad, grad.sum(axis=0))


@dataclass(frozen=True, eq=False)
class Conv2D(Layer):
    """Valid (unpadded) 2-D convolution; weight is ``[out_ch, in_ch, k, k]``."""

    in_ch: int
    out_ch: int
    kernel: int
    stride: int
    weight: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)

    kind = "Conv2D"

    @property
    def params(self) -> Params:
        return (self.weight, self.bias)

    def with_params(self, params: Params) -> "Conv2D":
        weight, bias = _check_same_shapes(self.kind, self.params, params)
        return replace(self, weight=weight, bias=bias)

    def check_input(self, shape):
        if len(shape) != 4 or shape[1] != self.in_ch:
            raise ValueError(f"expects [n, {self.in_ch}, h, w], got {list(shape)}")
        if min(shape[2:]) < self.kernel:
            raise ValueError(f"input {list(shape)} smaller than kernel {self.kernel}")

    def _windows(self, x):
        # [n, c, oh, ow, k, k]
        windows = sliding_window_view(x, (self.kernel, self.kernel), axis=(2, 3))
        return windows[:, :, :: self.stride, :: self.stride]

    def forward(self, x):
        windows = self._windows(x)
        out = np.einsum("ncijkl,ockl->noij", windows, self.weight, optimize=True)
        return out + self.bias[None, :, None, None], x

    def backward(self, grad, cache):
        x = cache
        windows = self._windows(x)
        grad_weight = np.einsum("noij,ncijkl->ockl", grad, windows, optimize=True)
        grad_bias = grad.sum(axis=(0, 2, 3))
        grad_x = np.zeros_like(x)
        out_h, out_w = grad.shape[2:]
        span_h = self.stride * (out_h - 1) + 1
        span_w = self.stride * (out_w - 1) + 1
        for row in range(self.kernel):
            for col in range(self.kernel):
                grad_x[
                    :, :, row : row + span_h : self.stride, col : col + span_w : self.stride
                ] += np.einsum("noij,oc->ncij", grad, self.weight[:, :, row, col])
        return grad_x, (grad_weight, grad_bias)


@dataclass(frozen=True, eq=False)
class ReLU(Layer):
    """Rectifier; the gradient at exactly 0 is 0."""

    kind = "ReLU"

    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, grad, cache):
        return np.where(cache, grad, 0.0), ()


@dataclass(frozen=True, eq=False)
class MaxPool2D(Layer):
    """Non-overlapping max pooling; ragged edges are cropped."""

    window: int

    kind = "MaxPool2D"

    def check_input(self, shape):
        if len(shape) != 4:
            raise ValueError(f"expects [n, c, h, w], got {list(shape)}")
        if min(shape[2:]) < self.window:
            raise ValueError(f"input {list(shape)} smaller than window {self.window}")

    def _blocks(self, x):
        n, c, h, w = x.shape
        size = self.window
        out_h, out_w = h // size, w // size
        cropped = x[:, :, : out_h * size, : out_w * size]
        blocks = cropped.reshape(n, c, out_h, size, out_w, size)
        return blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, out_h, out_w, size * size)

    def forward(self, x):
        blocks = self._blocks(x)
        # ties route the gradient to the lowest index in the window
        winners = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, winners[..., None], axis=-1)[..., 0]
        return out, (x.shape, winners)

    def backward(self, grad, cache):
        shape, winners = cache
        n, c, h, w = shape
        size = self.window
        out_h, out_w = grad.shape[2:]
        blocks = np.zeros((n, c, out_h, out_w, size * size))
        np.put_along_axis(blocks, winners[..., None], grad[..., None], axis=-1)
        spread = blocks.reshape(n, c, out_h, out_w, size, size).transpose(0, 1, 2, 4, 3, 5)
        grad_x = np.zeros(shape)
        grad_x[:, :, : out_h * size, : out_w * size] = spread.reshape(
            n, c, out_h * size, out_w * size
        )
        return grad_x, ()


@dataclass(frozen=True, eq=False)
class Flatten(Layer):
    """Collapse all but the batch axis."""

    kind = "Flatten"

    def check_input(self, shape):
        if len(shape) < 2:
            raise ValueError(f"expects [n, ...], got {list(shape)}")

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), ()


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Ordered layers ending in ``num_classes`` logits.

    ``architecture`` names the preset the model was built from, so a
    serialized model can be rebuilt and checked on load.
    """

    layers: Tuple[Layer, ...]
    num_classes: int = 10
    architecture: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        last_dense = next(
            (layer for layer in reversed(self.layers) if isinstance(layer, Dense)), None
        )
        if last_dense is not None and last_dense.out_dim != self.num_classes:
            raise ShapeMismatchError(
                f"final Dense outputs {last_dense.out_dim}, expected {self.num_classes} classes"
            )

    @property
    def params(self) -> List[Params]:
        """Per-layer parameter tuples (empty for parameterless layers)."""
        return [layer.params for layer in self.layers]

    @property
    def num_params(self) -> int:
        return sum(p.size for params in self.params for p in params)

    def with_params(self, params: Sequence[Params]) -> "NetworkModel":
        """New model with the same layers carrying ``params``."""
        if len(params) != len(self.layers):
            raise ShapeMismatchError(
                f"expected {len(self.layers)} parameter groups, got {len(params)}"
            )
        layers = []
        for index, (layer, layer_params) in enumerate(zip(self.layers, params)):
            try:
                layers.append(layer.with_params(tuple(layer_params)))
            except ShapeMismatchError as err:
                raise ShapeMismatchError(f"layer {index} ({layer.kind}): {err}") from err
        return replace(self, layers=tuple(layers))


def _run_forward(model: NetworkModel, images: np.ndarray):
    x = np.asarray(images, dtype=np.float64)
    caches = []
    for index, layer in enumerate(model.layers):
        try:
            layer.check_input(x.shape)
        except ValueError as err:
            raise ShapeMismatchError(f"layer {index} ({layer.kind}): {err}") from err
        x, cache = layer.forward(x)
        caches.append(cache)
    if x.ndim != 2 or x.shape[1] != model.num_classes:
        raise ShapeMismatchError(
            f"model output {list(x.shape)} is not [n, {model.num_classes}]"
        )
    if not np.all(np.isfinite(x)):
        raise NumericOverflowError("non-finite logits")
    return x, caches


def forward(model: NetworkModel, batch: Batch) -> np.ndarray:
    """Logits ``[n, num_classes]`` for the batch images."""
    logits, _ = _run_forward(model, batch.images)
    return logits


def _softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    rows = np.arange(len(labels))
    losses = np.log(total[:, 0]) - shifted[rows, labels]
    probs = exp / total
    probs[rows, labels] -= 1.0
    return float(losses.mean()), probs / len(labels)


def loss_and_grads(model: NetworkModel, batch: Batch) -> LossAndGrads:
    """Mean softmax cross-entropy and its exact gradients.

    Returns
    -------
    LossAndGrads
        ``param_grads`` mirrors ``model.params`` layer by layer and
        ``input_grads`` has the shape of ``batch.images``.
    """
    labels = np.asarray(batch.labels, dtype=np.int64)
    if labels.ndim != 1 or len(labels) != len(batch.images):
        raise ShapeMismatchError(
            f"{len(labels)} labels for {len(batch.images)} images"
        )
    if labels.size == 0:
        raise ValueError("empty batch")
    if labels.min() < 0 or labels.max() >= model.num_classes:
        raise ValueError(f"labels must lie in [0, {model.num_classes})")

    logits, caches = _run_forward(model, batch.images)
    loss, grad = _softmax_cross_entropy(logits, labels)
    if not math.isfinite(loss):
        raise NumericOverflowError(f"non-finite loss: {loss}")

    param_grads: List[Params] = [()] * len(model.layers)
    for index in range(len(model.layers) - 1, -1, -1):
        grad, param_grads[index] = model.layers[index].backward(grad, caches[index])
    return LossAndGrads(loss, param_grads, grad)


def sgd_step(
    model: NetworkModel, param_grads: Sequence[Params], lr: float
) -> NetworkModel:
    """Plain SGD: every parameter ``p`` becomes ``p - lr * g``."""
    if lr < 0:
        raise ValueError("learning rate must not be negative")
    if len(param_grads) != len(model.layers):
        raise ShapeMismatchError(
            f"expected {len(model.layers)} gradient groups, got {len(param_grads)}"
        )
    updated = []
    for index, (params, grads) in enumerate(zip(model.params, param_grads)):
        if len(params) != len(grads) or any(
            p.shape != np.shape(g) for p, g in zip(params, grads)
        ):
            raise ShapeMismatchError(
                f"layer {index} ({model.layers[index].kind}): gradient shapes "
                f"{[np.shape(g) for g in grads]} do not match parameters "
                f"{[p.shape for p in params]}"
            )
        updated.append(tuple(p - lr * np.asarray(g) for p, g in zip(params, grads)))
    return model.with_params(updated)


def predict(model: NetworkModel, images: np.ndarray) -> np.ndarray:
    """Predicted class per image; ties go to the lowest class index."""
    logits, _ = _run_forward(model, images)
    return logits.argmax(axis=1)


def evaluate_accuracy(model: NetworkModel, data: Iterable[Batch]) -> float:
    """Fraction of samples whose argmax logit equals the label."""
    correct = 0
    total = 0
    for batch in data:
        correct += int(np.count_nonzero(predict(model, batch.images) == batch.labels))
        total += len(batch.labels)
    if total == 0:
        raise ValueError("cannot evaluate accuracy on an empty dataset")
    return correct / total

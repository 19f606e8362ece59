"""Architecture presets for the MNIST classifiers."""
import math
from typing import Callable, Dict, List

import numpy as np

from .nn import Conv2D, Dense, Flatten, Layer, MaxPool2D, NetworkModel, ReLU
from .prng import CounterRng

IMAGE_SHAPE = (1, 28, 28)
NUM_CLASSES = 10


def he_uniform(rng: CounterRng, shape, fan_in: int) -> np.ndarray:
    """He-style scaled uniform init, ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``."""
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, shape)


def dense(rng: CounterRng, in_dim: int, out_dim: int) -> Dense:
    """Dense layer with He init and zero bias."""
    return Dense(
        in_dim,
        out_dim,
        he_uniform(rng, (in_dim, out_dim), in_dim),
        np.zeros(out_dim),
    )


def conv2d(rng: CounterRng, in_ch: int, out_ch: int, kernel: int, stride: int = 1) -> Conv2D:
    """Conv2D layer with He init and zero bias."""
    fan_in = in_ch * kernel * kernel
    return Conv2D(
        in_ch,
        out_ch,
        kernel,
        stride,
        he_uniform(rng, (out_ch, in_ch, kernel, kernel), fan_in),
        np.zeros(out_ch),
    )


def _mlp(rng: CounterRng) -> List[Layer]:
    return [
        Flatten(),
        dense(rng, 28 * 28, 128),
        ReLU(),
        dense(rng, 128, NUM_CLASSES),
    ]


def _cnn_small(rng: CounterRng) -> List[Layer]:
    conv_out = (28 - 3) // 1 + 1
    pooled = conv_out // 2
    return [
        conv2d(rng, 1, 8, 3, 1),
        ReLU(),
        MaxPool2D(2),
        Flatten(),
        dense(rng, 8 * pooled * pooled, 64),
        ReLU(),
        dense(rng, 64, NUM_CLASSES),
    ]


PRESETS: Dict[str, Callable[[CounterRng], List[Layer]]] = {
    "mlp": _mlp,
    "cnn-small": _cnn_small,
}


def build_model(architecture: str, rng: CounterRng) -> NetworkModel:
    """Freshly initialized model for a preset name."""
    try:
        make_layers = PRESETS[architecture]
    except KeyError:
        raise LookupError(
            f"Unknown architecture: {architecture} (choose from {', '.join(PRESETS)})"
        ) from None
    return NetworkModel(make_layers(rng), NUM_CLASSES, architecture)

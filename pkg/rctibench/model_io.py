"""Module to serialize trained models to a versioned binary file.

Layout: magic ``RCTIMDL1``, u32 format version, u32-length-prefixed UTF-8
preset name, u32 layer count, then per layer a u32 tensor count followed by
each tensor's u32 rank and u32 dims, and finally every parameter as
little-endian float64 in layer order. All integers are little-endian.
"""
import logging
from pathlib import Path
import struct
from typing import List, Union

import numpy as np

from .nn import NetworkModel, ShapeMismatchError
from .presets import build_model
from .prng import CounterRng

logger = logging.getLogger(__name__)

MAGIC = b"RCTIMDL1"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is malformed or does not match its preset."""


def dumps_model(model: NetworkModel) -> bytes:
    """Serialize a model built from a preset."""
    name = model.architecture.encode("utf-8")
    header = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(name)), name]
    header.append(struct.pack("<I", len(model.layers)))
    body = []
    for params in model.params:
        header.append(struct.pack("<I", len(params)))
        for tensor in params:
            header.append(struct.pack(f"<I{tensor.ndim}I", tensor.ndim, *tensor.shape))
            body.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    return b"".join(header + body)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise ModelFormatError("truncated model file")
        chunk = self.payload[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self, count: int = 1):
        values = struct.unpack(f"<{count}I", self.take(4 * count))
        return values[0] if count == 1 else values


def loads_model(payload: bytes) -> NetworkModel:
    """Rebuild a model from :func:`dumps_model` output."""
    reader = _Reader(payload)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    architecture = reader.take(reader.u32()).decode("utf-8")
    shapes: List[List[tuple]] = []
    for _ in range(reader.u32()):
        layer_shapes = []
        for _ in range(reader.u32()):
            rank = reader.u32()
            dims = reader.u32(rank) if rank else ()
            layer_shapes.append((dims,) if isinstance(dims, int) else tuple(dims))
        shapes.append(layer_shapes)
    params = []
    for layer_shapes in shapes:
        tensors = []
        for shape in layer_shapes:
            count = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(reader.take(8 * count), dtype="<f8")
            tensors.append(data.astype(np.float64).reshape(shape))
        params.append(tuple(tensors))
    if reader.offset != len(payload):
        raise ModelFormatError("trailing bytes after parameters")

    try:
        template = build_model(architecture, CounterRng(0))
        return template.with_params(params)
    except (LookupError, ShapeMismatchError) as err:
        raise ModelFormatError(f"parameters do not fit preset {architecture}: {err}") from err


def save_model(model: NetworkModel, path: Union[str, Path]) -> Path:
    """Write a model file, returning its path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps_model(model))
    logger.debug("Saved %s model to %s", model.architecture, path)
    return path


def load_model(path: Union[str, Path]) -> NetworkModel:
    """Read a model file written by :func:`save_model`."""
    return loads_model(Path(path).read_bytes())

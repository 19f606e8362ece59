"""Module to load MNIST IDX files and cut them into seeded subsets and batches."""
from dataclasses import dataclass, field, replace
import gzip
import logging
from pathlib import Path
import struct
from typing import Iterator, NamedTuple, Tuple, Union

import numpy as np

from .nn import Batch
from .prng import CounterRng

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
PathLike = Union[str, Path]


class IdxFormatError(ValueError):
    """An IDX file is malformed or disagrees with its companion file."""


class IdxHeader(NamedTuple):
    """Magic number and dimension sizes at the head of an IDX file."""

    magic: int
    dims: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Images ``[n, 1, 28, 28]`` in [0, 1] with labels and provenance."""

    images: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    provenance: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise IdxFormatError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )

    def __len__(self):
        return len(self.labels)


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as file:
            return file.read()
    return path.read_bytes()


def read_idx_header(payload: bytes, expected_magic: int, path: PathLike = "") -> IdxHeader:
    """Parse and check the big-endian header of an IDX payload."""
    if len(payload) < 4:
        raise IdxFormatError(f"{path}: truncated header")
    (magic,) = struct.unpack(">I", payload[:4])
    if magic != expected_magic:
        raise IdxFormatError(f"{path}: bad magic {magic}, expected {expected_magic}")
    rank = 3 if magic == IMAGES_MAGIC else 1
    if len(payload) < 4 + 4 * rank:
        raise IdxFormatError(f"{path}: truncated header")
    dims = struct.unpack(f">{rank}I", payload[4 : 4 + 4 * rank])
    return IdxHeader(magic, dims)


def _read_idx(path: PathLike, expected_magic: int) -> np.ndarray:
    payload = _read_bytes(path)
    header = read_idx_header(payload, expected_magic, path)
    offset = 4 + 4 * len(header.dims)
    expected = int(np.prod(header.dims, dtype=np.int64))
    body = np.frombuffer(payload, dtype=np.uint8, offset=offset)
    if body.size < expected:
        raise IdxFormatError(
            f"{path}: truncated payload, {body.size} of {expected} bytes"
        )
    if body.size > expected:
        logger.warning("%s: ignoring %d trailing bytes", path, body.size - expected)
    return body[:expected].reshape(header.dims)


def load_idx(path_images: PathLike, path_labels: PathLike) -> LabeledDataset:
    """Load an images/labels IDX pair, scaling pixels by 1/255."""
    raw_images = _read_idx(path_images, IMAGES_MAGIC)
    raw_labels = _read_idx(path_labels, LABELS_MAGIC)
    if len(raw_images) != len(raw_labels):
        raise IdxFormatError(
            f"{path_images} has {len(raw_images)} images but "
            f"{path_labels} has {len(raw_labels)} labels"
        )
    images = raw_images.astype(np.float64)[:, None, :, :] / 255.0
    logger.debug("Loaded %d samples from %s", len(images), path_images)
    return LabeledDataset(
        images, raw_labels.astype(np.int64), (str(path_images), str(path_labels))
    )


def write_idx(ds: LabeledDataset, path_images: PathLike, path_labels: PathLike) -> None:
    """Write a dataset back to an IDX pair (gzip when the suffix is ``.gz``)."""
    n, _, height, width = ds.images.shape
    pixels = np.rint(ds.images[:, 0] * 255.0).astype(np.uint8)
    for path, magic, dims, body in (
        (path_images, IMAGES_MAGIC, (n, height, width), pixels),
        (path_labels, LABELS_MAGIC, (n,), ds.labels.astype(np.uint8)),
    ):
        payload = struct.pack(f">I{len(dims)}I", magic, *dims) + body.tobytes()
        opener = gzip.open if Path(path).suffix == ".gz" else open
        with opener(path, "wb") as file:
            file.write(payload)


def subset(ds: LabeledDataset, n: int, seed: int) -> LabeledDataset:
    """``n`` samples drawn without replacement by a seeded Fisher-Yates shuffle."""
    if n < 1:
        raise ValueError("subset size must be positive")
    if n > len(ds):
        raise ValueError(f"subset of {n} requested from {len(ds)} samples")
    indices = CounterRng(seed).spawn("subset").permutation(len(ds))[:n]
    return replace(
        ds,
        images=ds.images[indices],
        labels=ds.labels[indices],
        provenance=ds.provenance + (f"subset n={n} seed={seed}",),
    )


def batches(ds: LabeledDataset, batch_size: int) -> Iterator[Batch]:
    """Consecutive batches in dataset order; the last may be short."""
    if batch_size < 1:
        raise ValueError("batch size must be at least 1")
    for start in range(0, len(ds), batch_size):
        yield Batch(ds.images[start : start + batch_size], ds.labels[start : start + batch_size])

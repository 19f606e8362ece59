"""Tiny synthetic MNIST-shaped data for fast tests."""
from pathlib import Path
from typing import Dict

import numpy as np

from rctibench.dataset import LabeledDataset, write_idx
from rctibench.prng import CounterRng


def make_dataset(n: int, seed: int = 0) -> LabeledDataset:
    """Each class lights a 6x6 block in its own spot over faint noise."""
    rng = CounterRng(seed)
    labels = np.arange(n, dtype=np.int64) % 10
    images = rng.spawn("noise").uniform(0.0, 0.2, (n, 1, 28, 28))
    for index, label in enumerate(labels):
        row, col = divmod(int(label), 5)
        images[index, 0, 4 + 12 * row : 10 + 12 * row, 1 + 5 * col : 7 + 5 * col] = 1.0
    # quantize to byte levels so an IDX write/read reproduces the images exactly
    images = np.rint(images * 255.0) / 255.0
    order = rng.spawn("order").permutation(n)
    return LabeledDataset(images[order], labels[order], ("synthetic",))


def write_idx_files(directory: Path, train_n: int = 120, test_n: int = 40) -> Dict[str, str]:
    """Write train/test IDX pairs and return the ``data.*`` config values."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for split, n, seed in (("train", train_n, 1), ("test", test_n, 2)):
        images = directory / f"{split}-images-idx3-ubyte.gz"
        labels = directory / f"{split}-labels-idx1-ubyte"
        write_idx(make_dataset(n, seed), images, labels)
        paths[f"data.{split}_images"] = str(images)
        paths[f"data.{split}_labels"] = str(labels)
    return paths

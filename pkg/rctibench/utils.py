"""Utilities shared by the commands."""
import json
import logging
import math
from pathlib import Path
from typing import Any

from .config import DataSettings
from .dataset import LabeledDataset, load_idx, subset

logger = logging.getLogger(__name__)


def load_split(settings: DataSettings, split: str, seed: int) -> LabeledDataset:
    """Load the ``train`` or ``test`` IDX pair and draw its seeded subset."""
    images, labels = f"{split}_images", f"{split}_labels"
    settings.require(images, labels)
    full = load_idx(getattr(settings, images), getattr(settings, labels))
    size = getattr(settings, f"{split}_size")
    if size > len(full):
        logger.warning(
            "data.%s_size=%d exceeds the %d %s samples available; using all of them",
            split,
            size,
            len(full),
            split,
        )
        size = len(full)
    data = subset(full, size, seed)
    logger.info("Loaded %d %s samples", len(data), split)
    return data


def json_ready(value: Any) -> Any:
    """Copy of ``value`` with non-finite floats as strings and paths as text."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {key: json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(item) for item in value]
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(value: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(json_ready(value), indent=2) + "\n", encoding="utf-8")
    return path

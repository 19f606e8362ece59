"""Module for abc interfaces."""

from abc import ABC
from pathlib import Path

from .config import RunConfig
from .energy import EnergyTracker


class MixinMeta(ABC):
    """
    Metaclass for well behaved type hint detection with composite class.
    """

    # https://github.com/python/mypy/issues/1996

    def __init__(self, *_args):
        self.config: RunConfig
        self.tracker: EnergyTracker
        self.output_dir: Path

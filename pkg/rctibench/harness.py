"""The benchmark harness: every command, sharing one config and tracker."""
from pathlib import Path
from typing import Optional

from .commands.experiment import CommandsExperiment
from .commands.rcti import CommandsRcti
from .config import RunConfig, parse_config
from .energy import EnergyTracker, make_utilization_source


# pylint: disable=too-many-ancestors
class RctiBench(CommandsExperiment, CommandsRcti):
    """Commands provided by `rctibench`.

    Parameters
    ----------
    config: RunConfig
        Parsed run configuration; all defaults when omitted.
    tracker: EnergyTracker
        Meter for every span; built from ``config.meter`` when omitted.
    """

    def __init__(
        self, config: Optional[RunConfig] = None, tracker: Optional[EnergyTracker] = None
    ):
        super().__init__()
        self.config = config or parse_config()
        meter = self.config.meter
        self.tracker = tracker or EnergyTracker(
            profile=meter.profile,
            utilization=make_utilization_source(meter.utilization),
            interval_s=meter.sample_interval_s,
        )
        self.output_dir = Path(self.config.output_directory)

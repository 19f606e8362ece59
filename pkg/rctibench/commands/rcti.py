"""Module for re-scoring commands that work from result tables only."""
import logging
from pathlib import Path
from typing import List, Optional, Union

from ..common import stage
from ..interfaces import MixinMeta
from ..rcti import RctiRecord, recommend
from ..tables import read_rcti, read_stats, score_stats, write_figure_data, write_rcti

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class CommandsRcti(MixinMeta):
    """Mixin providing the rcti and figure-data commands."""

    @stage
    def cmd_rcti(self, stats_csv: PathLike, output: Optional[PathLike] = None) -> List[RctiRecord]:
        """Score a stats CSV without retraining and write ``rcti.csv``."""
        settings = self.config.rcti
        records = score_stats(read_stats(stats_csv), settings.thresholds, settings.carbon_basis)
        path = write_rcti(records, output or self.output_dir / "rcti.csv")
        logger.info("Scored %d robust model(s) into %s", len(records), path)
        best = recommend(records)
        if best is None:
            logger.info("No robust model improves on the baseline")
        else:
            logger.info(
                "Recommended: %s robust model at epsilon %g (%s)",
                best.attack,
                best.epsilon,
                best.elasticity.value,
            )
        return records

    @stage("figure-data")
    def cmd_figure_data(
        self, rcti_csv: PathLike, directory: Optional[PathLike] = None
    ) -> List[Path]:
        """Write plot-ready epsilon/value CSVs for dR, dC and RCTI."""
        records = read_rcti(rcti_csv)
        paths = write_figure_data(records, directory or self.output_dir / "figures")
        logger.info("Wrote figure data for %d record(s)", len(records))
        return paths

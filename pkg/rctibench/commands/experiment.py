"""Module for the full experiment command."""
from dataclasses import asdict
import logging
from typing import Dict, List

from filelock import FileLock, Timeout

from .. import __version__
from ..attacks import AttackKind
from ..common import StageError, running_stage
from ..manifest import RunManifest
from ..rcti import recommend
from ..tables import (
    BASELINE,
    ROBUST,
    read_stats,
    score_stats,
    stats_row,
    write_figure_data,
    write_rcti,
    write_report,
    write_spans,
    write_stats,
)
from ..utils import load_split
from .attack import CommandsAttack, Measurement
from .train import CommandsTrain, TrainedModel

logger = logging.getLogger(__name__)

LOCK_NAME = ".rctibench.lock"


class CommandsExperiment(CommandsTrain, CommandsAttack):
    """Mixin providing the experiment command."""

    def _row(
        self, kind: AttackKind, family: str, measured: Measurement, trained: TrainedModel
    ) -> dict:
        reports = list(measured.reports)
        if self.config.rcti.include_training_energy:
            reports.insert(0, trained.report)
        return stats_row(kind.value, family, measured.epsilon, measured.accuracy, reports)

    def _robust_models(
        self, train_data, kind: AttackKind, manifest: RunManifest
    ) -> Dict[float, TrainedModel]:
        """Robust model to evaluate at each grid epsilon, trained in grid order.

        Per-epsilon models by default; with ``attack.sweep_fixed_epsilon`` one
        model serves the whole grid. The epsilon 0 row reuses the model of the
        smallest positive epsilon.
        """
        grid = self.config.attack.epsilon_grid
        positive = [epsilon for epsilon in grid if epsilon > 0]
        if not positive:
            return {}
        fixed = self.config.attack.sweep_fixed_epsilon
        if fixed is not None:
            trained = self.train_robust_model(train_data, kind, fixed)
            manifest.add_artifact("models", trained.path.stem, trained.path)
            return {epsilon: trained for epsilon in grid}
        models = {}
        for epsilon in positive:
            models[epsilon] = self.train_robust_model(train_data, kind, epsilon)
            manifest.add_artifact("models", models[epsilon].path.stem, models[epsilon].path)
        if 0.0 in grid:
            models[0.0] = models[positive[0]]
        return models

    def _run(self, manifest: RunManifest) -> None:
        cfg = self.config
        with running_stage("load-data"):
            train_data = load_split(cfg.data, "train", cfg.seed)
            test_data = load_split(cfg.data, "test", cfg.seed)

        baseline = self.train_baseline_model(train_data)
        manifest.add_artifact("models", "baseline", baseline.path)

        rows: List[dict] = []
        for kind in cfg.attack.kinds:
            robust = self._robust_models(train_data, kind, manifest)
            for epsilon in cfg.attack.epsilon_grid:
                measured = self.measure(baseline.model, BASELINE, kind, epsilon, test_data)
                rows.append(self._row(kind, BASELINE, measured, baseline))
                if epsilon in robust:
                    trained = robust[epsilon]
                    measured = self.measure(trained.model, ROBUST, kind, epsilon, test_data)
                    rows.append(self._row(kind, ROBUST, measured, trained))

        with running_stage("write-tables"):
            manifest.add_spans(self.tracker.reports)
            stats_path = write_stats(rows, self.output_dir / "stats.csv")
            manifest.add_artifact("tables", "stats", stats_path)
            manifest.add_artifact(
                "tables", "spans", write_spans(self.tracker.reports, self.output_dir / "spans.csv")
            )

        with running_stage("rcti"):
            # score the CSV as written so a later `rcti` replay matches bit for bit
            stats = read_stats(stats_path)
            records = score_stats(stats, cfg.rcti.thresholds, cfg.rcti.carbon_basis)
            best = recommend(records)
            manifest.add_scores(records, best)
            if records:
                manifest.add_artifact(
                    "tables", "rcti", write_rcti(records, self.output_dir / "rcti.csv")
                )
                for path in write_figure_data(records, self.output_dir / "figures"):
                    manifest.add_artifact("tables", f"figures/{path.stem}", path)
            else:
                logger.info("No robust models in this run; baseline stats only")
            manifest.add_artifact(
                "tables",
                "report",
                write_report(stats, records, self.output_dir / "report.md", best),
            )
        if best is not None:
            logger.info(
                "Recommended: %s robust model at epsilon %g (RCTI %g, %s)",
                best.attack,
                best.epsilon,
                best.rcti,
                best.elasticity.value,
            )

    def cmd_experiment(self) -> RunManifest:
        """Run the whole sweep: train, attack, meter and score.

        The manifest is written whether the run completes or fails; on failure
        it names the stage and the error is re-raised.
        """
        cfg = self.config
        self.output_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(
            version=__version__,
            config=cfg.snapshot(),
            hardware=asdict(cfg.meter.profile),
            utilization=self.tracker.utilization.name,
        )
        lock = FileLock(str(self.output_dir / LOCK_NAME), timeout=0)
        try:
            with lock:
                try:
                    self._run(manifest)
                    manifest.complete()
                except StageError as err:
                    manifest.fail(err.stage, err.message)
                    raise
                except BaseException as err:
                    manifest.fail("experiment", str(err) or type(err).__name__)
                    raise
                finally:
                    manifest.write(self.output_dir / "manifest.json")
        except Timeout:
            raise StageError(
                "experiment", f"{self.output_dir} is in use by another run"
            ) from None
        return manifest

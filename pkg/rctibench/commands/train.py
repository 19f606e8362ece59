"""Module for training commands."""
import logging
from pathlib import Path
from typing import Callable, NamedTuple, Optional

from ..attacks import AttackKind, AttackSpec
from ..common import running_stage, stage
from ..config import ConfigError
from ..energy import EnergyReport
from ..interfaces import MixinMeta
from ..model_io import save_model
from ..nn import NetworkModel
from ..training import adversarial_train, as_baseline, train_baseline
from ..utils import load_split, write_json

logger = logging.getLogger(__name__)

MODEL_SUFFIX = ".rctimdl"


class TrainedModel(NamedTuple):
    """A trained model, its metered training span and its saved file."""

    model: NetworkModel
    report: EnergyReport
    path: Path


def model_name(family: str, kind: Optional[AttackKind] = None, epsilon: float = 0.0) -> str:
    """``baseline`` or ``robust-FG-0.1``: file stem and span tag of a model."""
    if kind is None:
        return family
    return f"{family}-{kind.value}-{epsilon:g}"


class CommandsTrain(MixinMeta):
    """Mixin providing the training commands."""

    def _train_metered(
        self, name: str, label: str, train: Callable[[], NetworkModel]
    ) -> TrainedModel:
        with running_stage(label), self.tracker.metered(label) as handle:
            model = train()
        path = save_model(model, self.output_dir / "models" / f"{name}{MODEL_SUFFIX}")
        return TrainedModel(model, handle.report, path)

    def train_baseline_model(self, train_data) -> TrainedModel:
        cfg = as_baseline(self.config.train)
        return self._train_metered(
            "baseline", "train[baseline]", lambda: train_baseline(train_data, cfg)
        )

    def train_robust_model(self, train_data, kind: AttackKind, epsilon: float) -> TrainedModel:
        settings = self.config.attack
        attack = AttackSpec(
            kind=kind,
            epsilon=epsilon,
            step_size=settings.step_size,
            num_steps=settings.steps,
        )
        return self._train_metered(
            model_name("robust", kind, epsilon),
            f"train[robust,{attack.label}]",
            lambda: adversarial_train(train_data, self.config.train, attack),
        )

    def _save_training_report(self, trained: TrainedModel) -> Path:
        path = trained.path.with_suffix(".energy.json")
        return write_json(
            {"model": str(trained.path), **trained.report.as_row()}, path
        )

    @stage
    def cmd_train_baseline(self) -> TrainedModel:
        """Train the baseline model on clean data and save it."""
        train_data = load_split(self.config.data, "train", self.config.seed)
        trained = self.train_baseline_model(train_data)
        self._save_training_report(trained)
        logger.info("Baseline model saved to %s", trained.path)
        return trained

    @stage
    def cmd_train_robust(self) -> TrainedModel:
        """Adversarially train one model at ``attack.epsilon`` and save it."""
        kinds = self.config.attack.kinds
        if len(kinds) != 1:
            raise ConfigError("train-robust takes exactly one attack.kind")
        epsilon = self.config.attack.epsilon
        if epsilon <= 0:
            raise ConfigError("train-robust needs attack.epsilon > 0")
        train_data = load_split(self.config.data, "train", self.config.seed)
        trained = self.train_robust_model(train_data, kinds[0], epsilon)
        self._save_training_report(trained)
        logger.info("Robust model saved to %s", trained.path)
        return trained

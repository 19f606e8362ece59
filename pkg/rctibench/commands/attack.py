"""Module for attack-and-evaluate commands."""
import logging
from pathlib import Path
from typing import List, NamedTuple, Union

from ..attacks import AttackKind, craft_adversarial_testset
from ..common import running_stage, stage
from ..dataset import LabeledDataset, batches
from ..energy import EnergyReport
from ..interfaces import MixinMeta
from ..model_io import load_model
from ..nn import NetworkModel, evaluate_accuracy
from ..prng import CounterRng
from ..utils import load_split

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 256


class Measurement(NamedTuple):
    """Accuracy of one model under one attack, with the spans it took."""

    kind: AttackKind
    epsilon: float
    accuracy: float
    reports: List[EnergyReport]


class CommandsAttack(MixinMeta):
    """Mixin providing attack evaluation."""

    def measure(
        self,
        model: NetworkModel,
        family: str,
        kind: AttackKind,
        epsilon: float,
        test_data: LabeledDataset,
    ) -> Measurement:
        """Craft the adversarial test set (if epsilon > 0), then evaluate.

        Each step runs in its own metered span: ``attack[...]`` and ``eval[...]``.
        """
        spec = self.config.attack.spec(kind, epsilon)
        tag = f"{family},{spec.label}"
        reports = []
        data = test_data
        if epsilon > 0:
            label = f"attack[{tag}]"
            rng = CounterRng(self.config.seed).spawn("attack", family, kind.value, epsilon)
            with running_stage(label), self.tracker.metered(label) as handle:
                data = craft_adversarial_testset(
                    model, test_data, spec, EVAL_BATCH_SIZE, rng
                )
            reports.append(handle.report)
        label = f"eval[{tag}]"
        with running_stage(label), self.tracker.metered(label) as handle:
            accuracy = evaluate_accuracy(model, batches(data, EVAL_BATCH_SIZE))
        reports.append(handle.report)
        logger.info("%s accuracy under %s: %.4f", family, spec.label, accuracy)
        return Measurement(kind, epsilon, accuracy, reports)

    @stage
    def cmd_attack_eval(self, model_path: Union[str, Path]) -> List[Measurement]:
        """Evaluate a saved model under each configured attack at ``attack.epsilon``."""
        model = load_model(model_path)
        test_data = load_split(self.config.data, "test", self.config.seed)
        family = Path(model_path).stem
        return [
            self.measure(model, family, kind, self.config.attack.epsilon, test_data)
            for kind in self.config.attack.kinds
        ]

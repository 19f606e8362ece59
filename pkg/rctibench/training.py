"""Module to train baseline and adversarially robust models."""
from dataclasses import dataclass, replace
from fractions import Fraction
import logging
import math
from typing import Optional

from .attacks import AttackKind, AttackSpec, attack_batch
from .dataset import LabeledDataset
from .nn import Batch, NetworkModel, NumericOverflowError, loss_and_grads, sgd_step
from .presets import build_model
from .prng import CounterRng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Training regime shared by the baseline and robust models."""

    epochs: int = 2
    batch_size: int = 64
    learning_rate: float = 0.1
    adversarial_ratio: float = 0.5
    seed: int = 0
    architecture: str = "mlp"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must not be negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.adversarial_ratio <= 1.0:
            raise ValueError(f"adversarial ratio {self.adversarial_ratio} outside [0, 1]")


def _training_attack(attack: AttackSpec) -> AttackSpec:
    # PGD crafts from a random start at training time; evaluation stays deterministic.
    if attack.kind is AttackKind.PGD:
        return replace(attack, random_start=True)
    return attack


def _train(
    ds: LabeledDataset, cfg: TrainConfig, attack: Optional[AttackSpec]
) -> NetworkModel:
    root = CounterRng(cfg.seed)
    model = build_model(cfg.architecture, root.spawn("init"))
    # exact decimal ratio: floor(0.29 * 100) must be 29, not 28
    ratio = Fraction(repr(cfg.adversarial_ratio)) if attack is not None else Fraction(0)
    crafting = _training_attack(attack) if attack is not None else None
    n = len(ds)
    steps = 0
    last_loss = math.nan
    for epoch in range(cfg.epochs):
        order = root.spawn("shuffle", epoch).permutation(n)
        for index, start in enumerate(range(0, n, cfg.batch_size)):
            chosen = order[start : start + cfg.batch_size]
            images = ds.images[chosen]
            labels = ds.labels[chosen]
            count = math.floor(ratio * len(chosen))
            if count:
                stream = root.spawn("adversarial", epoch, index)
                picked = stream.spawn("pick").choice(len(chosen), count)
                sub_batch = Batch(images[picked], labels[picked])
                images = images.copy()
                images[picked] = attack_batch(model, sub_batch, crafting, stream.spawn("noise"))
            try:
                result = loss_and_grads(model, Batch(images, labels))
            except NumericOverflowError as err:
                logger.error(
                    "Training diverged at epoch %d, batch %d (lr=%g): %s",
                    epoch,
                    index,
                    cfg.learning_rate,
                    err,
                )
                raise
            model = sgd_step(model, result.param_grads, cfg.learning_rate)
            steps += 1
            last_loss = result.loss
        logger.debug("Epoch %d done, last batch loss %.6f", epoch, last_loss)
    logger.info(
        "Trained %s model (%s) for %d steps",
        cfg.architecture,
        crafting.label if ratio and crafting.epsilon else "clean",
        steps,
    )
    return model


def train_baseline(ds: LabeledDataset, cfg: TrainConfig) -> NetworkModel:
    """Train on clean data only."""
    if cfg.adversarial_ratio != 0:
        raise ValueError("baseline training requires adversarial_ratio == 0")
    return _train(ds, cfg, None)


def adversarial_train(
    ds: LabeledDataset, cfg: TrainConfig, attack: AttackSpec
) -> NetworkModel:
    """Train with a fraction of every batch replaced by attack outputs.

    Samples are crafted against the in-progress model right before each SGD
    step; ``floor(adversarial_ratio * batch_n)`` of them per batch, at indices
    drawn from the seeded generator.
    """
    if attack.epsilon <= 0 and cfg.adversarial_ratio != 0:
        raise ValueError("adversarial training needs epsilon > 0 or adversarial_ratio == 0")
    return _train(ds, cfg, attack)


def as_baseline(cfg: TrainConfig) -> TrainConfig:
    """The same regime without adversarial samples."""
    return replace(cfg, adversarial_ratio=0.0)

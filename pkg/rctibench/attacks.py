"""Module for the FGSM and PGD evasion attacks (L-infinity, untargeted)."""
from dataclasses import dataclass, replace
from enum import Enum
import logging
from typing import Optional, Tuple

import numpy as np

from .dataset import LabeledDataset, batches
from .nn import Batch, NetworkModel, loss_and_grads
from .prng import CounterRng

logger = logging.getLogger(__name__)

DEFAULT_PGD_STEPS = 10


class AttackKind(Enum):
    """Attack family."""

    FG = "FG"
    PGD = "PGD"

    @classmethod
    def parse(cls, value: str) -> "AttackKind":
        try:
            return cls(value.strip().upper())
        except ValueError:
            raise ValueError(f"Unknown attack kind: {value} (expected FG or PGD)") from None


@dataclass(frozen=True)
class AttackSpec:
    """Attack parameters; ``step_size`` of None means ``epsilon / 4``."""

    kind: AttackKind
    epsilon: float
    step_size: Optional[float] = None
    num_steps: int = DEFAULT_PGD_STEPS
    random_start: bool = False
    clip: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon {self.epsilon} outside [0, 1]")
        if self.kind is AttackKind.PGD:
            if self.num_steps < 1:
                raise ValueError("PGD needs at least one step")
            if self.step_size is not None and self.step_size <= 0:
                raise ValueError("PGD step size must be positive")
        if self.clip[0] >= self.clip[1]:
            raise ValueError(f"empty clip range {self.clip}")

    @property
    def alpha(self) -> float:
        """Effective PGD step size."""
        return self.epsilon / 4 if self.step_size is None else self.step_size

    @property
    def label(self) -> str:
        return f"{self.kind.value},{self.epsilon:g}"


def _signed_step(images: np.ndarray, grads: np.ndarray, size: float, clip) -> np.ndarray:
    # np.sign(0) == 0: no perturbation where the gradient is silent
    return np.clip(images + size * np.sign(grads), clip[0], clip[1])


def fgsm(model: NetworkModel, batch: Batch, spec: AttackSpec) -> np.ndarray:
    """One signed-gradient step of size epsilon, clipped to the pixel range."""
    if spec.kind is not AttackKind.FG:
        raise ValueError(f"fgsm called with a {spec.kind.value} spec")
    if spec.epsilon == 0:
        return np.array(batch.images, dtype=np.float64)
    grads = loss_and_grads(model, batch).input_grads
    return _signed_step(batch.images, grads, spec.epsilon, spec.clip)


def pgd(
    model: NetworkModel,
    batch: Batch,
    spec: AttackSpec,
    rng: Optional[CounterRng] = None,
) -> np.ndarray:
    """Iterated signed-gradient steps projected onto the epsilon ball.

    Parameters
    ----------
    rng: CounterRng
        Source of the uniform random start; required when
        ``spec.random_start`` is set.
    """
    if spec.kind is not AttackKind.PGD:
        raise ValueError(f"pgd called with a {spec.kind.value} spec")
    origin = np.asarray(batch.images, dtype=np.float64)
    if spec.epsilon == 0:
        return origin.copy()
    lower = np.maximum(origin - spec.epsilon, spec.clip[0])
    upper = np.minimum(origin + spec.epsilon, spec.clip[1])
    current = origin
    if spec.random_start:
        if rng is None:
            raise ValueError("random start needs a random generator")
        noise = rng.uniform(-spec.epsilon, spec.epsilon, origin.shape)
        current = np.clip(origin + noise, lower, upper)
    for _ in range(spec.num_steps):
        grads = loss_and_grads(model, Batch(current, batch.labels)).input_grads
        current = _signed_step(current, grads, spec.alpha, spec.clip)
        current = np.clip(current, lower, upper)
    return current


def attack_batch(
    model: NetworkModel,
    batch: Batch,
    spec: AttackSpec,
    rng: Optional[CounterRng] = None,
) -> np.ndarray:
    """Dispatch to the attack named by ``spec.kind``."""
    if spec.kind is AttackKind.FG:
        return fgsm(model, batch, spec)
    return pgd(model, batch, spec, rng)


def craft_adversarial_testset(
    model: NetworkModel,
    ds: LabeledDataset,
    spec: AttackSpec,
    batch_size: int = 256,
    rng: Optional[CounterRng] = None,
) -> LabeledDataset:
    """White-box adversarial copy of ``ds`` crafted against ``model``.

    Each batch draws its random start (if any) from the substream of ``rng``
    keyed by the batch index, so results do not depend on batch scheduling.
    """
    if spec.epsilon == 0:
        return ds
    crafted = []
    for index, batch in enumerate(batches(ds, batch_size)):
        batch_rng = rng.spawn(index) if rng is not None else None
        crafted.append(attack_batch(model, batch, spec, batch_rng))
    logger.debug("Crafted %d adversarial samples (%s)", len(ds), spec.label)
    return replace(
        ds,
        images=np.concatenate(crafted),
        provenance=ds.provenance + (f"attack {spec.label}",),
    )

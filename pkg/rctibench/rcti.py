"""Module for the Robustness-Carbon Trade-off Index (RCTI).

For a robust model measured against the baseline at the same attack strength:

- relative robustness ``dR = (P_i - P_base) / P_base``
- relative carbon change ``dC = (C_i - C_base) / C_base``
- ``RCTI = |dC / dR|``, read like a point elasticity and banded into five
  elasticity classes.

Sentinels: ``math.inf`` for an unbounded ratio, ``math.nan`` for a 0/0
"no change" ratio.
"""
from dataclasses import dataclass
from enum import Enum
import logging
import math
from typing import FrozenSet, Iterable, List, Optional, Sequence

from .energy import EnergyReport

logger = logging.getLogger(__name__)

DEFAULT_CRITICAL_THRESHOLD = 100.0
DEFAULT_TOLERANCE = 1e-6


class ElasticityClass(Enum):
    """Elasticity of robustness, most to least environmentally costly."""

    ECO_CRITICAL = "Eco-Critical"
    ECO_COSTLY = "Eco-Costly"
    ECO_NEUTRAL = "Eco-Neutral"
    ECO_EFFICIENT = "Eco-Efficient"
    ECO_IDEAL = "Eco-Ideal"

    @property
    def preference(self) -> int:
        """Higher is better for the environment."""
        return _PREFERENCE[self]


_PREFERENCE = {
    ElasticityClass.ECO_CRITICAL: 0,
    ElasticityClass.ECO_COSTLY: 1,
    ElasticityClass.ECO_NEUTRAL: 2,
    ElasticityClass.ECO_EFFICIENT: 3,
    ElasticityClass.ECO_IDEAL: 4,
}


class CarbonBasis(Enum):
    """Quantity a sweep uses as its carbon measure."""

    ENERGY = "energy"
    EMISSIONS = "emissions"


@dataclass(frozen=True)
class Thresholds:
    """Eco-Critical cut-off and equality tolerance for the point classes."""

    critical: float = DEFAULT_CRITICAL_THRESHOLD
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.critical <= 1:
            raise ValueError("the Eco-Critical threshold must exceed 1")
        if not 0 <= self.tolerance < 1:
            raise ValueError("tolerance must lie in [0, 1)")


@dataclass(frozen=True)
class ModelMeasurement:
    """Accuracy and carbon of one model at one attack strength."""

    epsilon: float
    performance: float
    carbon: float
    carbon_basis: CarbonBasis = CarbonBasis.ENERGY
    span_set: FrozenSet[str] = frozenset({"attack", "eval"})
    attack: str = ""

    def __post_init__(self):
        if not 0.0 <= self.performance <= 1.0:
            raise ValueError(f"performance {self.performance} outside [0, 1]")
        if self.carbon < 0:
            raise ValueError("carbon must not be negative")


@dataclass(frozen=True)
class RctiRecord:
    """One scored robust model; ``no_change`` marks a 0/0 RCTI."""

    epsilon: float
    delta_r: float
    delta_c: float
    rcti: float
    elasticity: ElasticityClass
    no_change: bool = False
    attack: str = ""


def compute_robustness(p_i: float, p_base: float) -> float:
    """Relative performance change of a robust model over the baseline.

    Returns ``inf`` when only the baseline scores zero and ``nan`` when
    both do.
    """
    if p_i < 0 or p_base < 0:
        raise ValueError("performance must not be negative")
    if p_base == 0:
        return math.inf if p_i > 0 else math.nan
    return (p_i - p_base) / p_base


def compute_carbon_delta(c_i: float, c_base: float) -> float:
    """Relative carbon change of a robust model over the baseline."""
    if c_i < 0 or c_base < 0:
        raise ValueError("carbon must not be negative")
    if c_base == 0:
        raise ValueError("baseline carbon must be positive")
    return (c_i - c_base) / c_base


def compute_rcti(delta_c: float, delta_r: float) -> float:
    """``|delta_c / delta_r|`` with the sentinel conventions.

    An infinite ``delta_r`` yields ``inf`` (not the arithmetic 0); a zero or
    ``nan`` ``delta_r`` yields ``inf`` unless ``delta_c`` is also zero, which
    yields ``nan``.
    """
    if math.isinf(delta_r):
        if delta_c != 0:
            logger.warning(
                "dR is infinite; reporting RCTI as infinite although |dC/dR| -> 0"
            )
        return math.inf
    if delta_r == 0 or math.isnan(delta_r):
        return math.nan if delta_c == 0 else math.inf
    return abs(delta_c / delta_r)


def classify_elasticity(
    rcti: float, thresholds: Thresholds = Thresholds()
) -> ElasticityClass:
    """Band an RCTI value; a ``nan`` (no change) is Eco-Neutral."""
    if math.isnan(rcti):
        return ElasticityClass.ECO_NEUTRAL
    if rcti < 0:
        raise ValueError(f"RCTI cannot be negative: {rcti}")
    if math.isinf(rcti) or rcti > thresholds.critical:
        return ElasticityClass.ECO_CRITICAL
    if rcti <= thresholds.tolerance:
        return ElasticityClass.ECO_IDEAL
    if abs(rcti - 1.0) <= thresholds.tolerance:
        return ElasticityClass.ECO_NEUTRAL
    if rcti > 1.0:
        return ElasticityClass.ECO_COSTLY
    return ElasticityClass.ECO_EFFICIENT


def score(
    baseline: ModelMeasurement,
    model: ModelMeasurement,
    thresholds: Thresholds = Thresholds(),
) -> RctiRecord:
    """Score one robust model against its baseline measurement."""
    if model.carbon_basis is not baseline.carbon_basis:
        raise ValueError(
            f"mixed carbon bases: {model.carbon_basis.value} vs {baseline.carbon_basis.value}"
        )
    if model.span_set != baseline.span_set:
        raise ValueError(
            f"mixed span sets: {sorted(model.span_set)} vs {sorted(baseline.span_set)}"
        )
    delta_r = compute_robustness(model.performance, baseline.performance)
    delta_c = compute_carbon_delta(model.carbon, baseline.carbon)
    rcti = compute_rcti(delta_c, delta_r)
    return RctiRecord(
        epsilon=model.epsilon,
        delta_r=delta_r,
        delta_c=delta_c,
        rcti=rcti,
        elasticity=classify_elasticity(rcti, thresholds),
        no_change=math.isnan(rcti),
        attack=model.attack,
    )


def run_rcti_sweep(
    baseline: ModelMeasurement,
    models: Sequence[ModelMeasurement],
    thresholds: Thresholds = Thresholds(),
) -> List[RctiRecord]:
    """One record per robust model, in input order."""
    if not models:
        raise ValueError("no models to score")
    return [score(baseline, model, thresholds) for model in models]


def recommend(records: Iterable[RctiRecord]) -> Optional[RctiRecord]:
    """The record balancing robustness and emissions best, if any improves.

    Only records with a positive robustness gain qualify; among them the best
    elasticity class wins, then the lowest RCTI, then the lowest epsilon.
    """
    candidates = [
        record
        for record in records
        if not math.isnan(record.delta_r) and record.delta_r > 0
    ]
    if not candidates:
        return None
    return min(
        candidates,
        key=lambda record: (-record.elasticity.preference, record.rcti, record.epsilon),
    )


def carbon_delta_from_reports(
    robust: Iterable[EnergyReport],
    baseline: Iterable[EnergyReport],
    basis: CarbonBasis = CarbonBasis.ENERGY,
) -> float:
    """dC from two sets of span reports, summed on the chosen basis."""

    def total(reports: Iterable[EnergyReport]) -> float:
        if basis is CarbonBasis.ENERGY:
            return sum(report.total_energy_kwh for report in reports)
        return sum(report.emissions_g for report in reports)

    return compute_carbon_delta(total(robust), total(baseline))

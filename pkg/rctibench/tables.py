"""Module for result tables: stats (per model and epsilon), spans, RCTI, figures.

Stats rows carry accuracy and summed span energies per (attack, model, epsilon);
RCTI rows carry one scored robust model per (attack, epsilon). Both are
written with pandas and read back with round-trip float precision, so
re-scoring a stats CSV reproduces the in-memory records exactly.
"""
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import pandas as pd

from .energy import EnergyReport
from .rcti import (
    CarbonBasis,
    ElasticityClass,
    ModelMeasurement,
    RctiRecord,
    Thresholds,
    score,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BASELINE = "baseline"
ROBUST = "robust"
STATS_COLUMNS = [
    "attack",
    "model",
    "epsilon",
    "accuracy",
    "cpu_kwh",
    "ram_kwh",
    "total_kwh",
    "duration_s",
    "emissions_g",
    "spans",
]
SPAN_COLUMNS = ["span_label", "duration_s", "cpu_kwh", "ram_kwh", "total_kwh", "emissions_g"]
RCTI_COLUMNS = ["attack", "epsilon", "delta_r", "delta_c", "rcti", "elasticity", "no_change"]
FIGURE_COLUMNS = ["attack", "epsilon", "value", "was_infinite"]
FIGURES = ("delta_r", "delta_c", "rcti")
SPAN_SEPARATOR = ";"


def stats_row(
    attack: str,
    model: str,
    epsilon: float,
    accuracy: float,
    reports: Sequence[EnergyReport],
) -> Dict[str, object]:
    """One stats row; energy and duration columns are sums over ``reports``."""
    if model not in (BASELINE, ROBUST):
        raise ValueError(f"model must be {BASELINE} or {ROBUST}, got {model}")
    return {
        "attack": attack,
        "model": model,
        "epsilon": epsilon,
        "accuracy": accuracy,
        "cpu_kwh": math.fsum(report.cpu_energy_kwh for report in reports),
        "ram_kwh": math.fsum(report.ram_energy_kwh for report in reports),
        "total_kwh": math.fsum(report.total_energy_kwh for report in reports),
        "duration_s": math.fsum(report.duration_s for report in reports),
        "emissions_g": math.fsum(report.emissions_g for report in reports),
        "spans": SPAN_SEPARATOR.join(report.label for report in reports),
    }


def span_kinds(spans: str) -> frozenset:
    """``attack[FG,0.1];eval[...]`` -> ``{"attack", "eval"}``."""
    return frozenset(label.split("[", 1)[0] for label in spans.split(SPAN_SEPARATOR) if label)


def _write(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, na_rep="nan")
    logger.debug("Wrote %d rows to %s", len(frame), path)
    return path


def _read(path: PathLike, columns: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path}: empty table") from None
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
    if frame.empty:
        raise ValueError(f"{path}: no rows")
    return frame


def _float(value) -> float:
    # keep_default_na=False leaves "nan"/"inf" as text in object columns
    return float(value)


def write_stats(rows: Iterable[Dict[str, object]], path: PathLike) -> Path:
    return _write(pd.DataFrame(list(rows), columns=STATS_COLUMNS), path)


def read_stats(path: PathLike) -> pd.DataFrame:
    """Read a stats CSV, checking columns and the model column's values."""
    frame = _read(path, STATS_COLUMNS[:-1])
    if "spans" not in frame.columns:
        frame["spans"] = ""
    frame["spans"] = frame["spans"].astype(str).replace("nan", "")
    frame["attack"] = frame["attack"].astype(str)
    bad = sorted(set(frame["model"]) - {BASELINE, ROBUST})
    if bad:
        raise ValueError(f"{path}: unknown model value(s) {', '.join(map(str, bad))}")
    keys = frame[["attack", "model", "epsilon"]]
    if keys.duplicated().any():
        first = keys[keys.duplicated()].iloc[0]
        raise ValueError(
            f"{path}: duplicate row for {first['attack']} {first['model']} eps={first['epsilon']:g}"
        )
    return frame


def write_spans(reports: Iterable[EnergyReport], path: PathLike) -> Path:
    return _write(pd.DataFrame([report.as_row() for report in reports], columns=SPAN_COLUMNS), path)


def _measurement(row, basis: CarbonBasis) -> ModelMeasurement:
    carbon = row["total_kwh"] if basis is CarbonBasis.ENERGY else row["emissions_g"]
    return ModelMeasurement(
        epsilon=_float(row["epsilon"]),
        performance=_float(row["accuracy"]),
        carbon=_float(carbon),
        carbon_basis=basis,
        span_set=span_kinds(row["spans"]),
        attack=row["attack"],
    )


def score_stats(
    stats: pd.DataFrame,
    thresholds: Thresholds = Thresholds(),
    basis: CarbonBasis = CarbonBasis.ENERGY,
) -> List[RctiRecord]:
    """Score every robust row against the baseline row at the same attack and epsilon.

    Records come out grouped by attack (first-appearance order), then by
    ascending epsilon. A stats table with baseline rows only scores to an
    empty list.
    """
    if stats.empty:
        raise ValueError("no stats rows to score")
    records = []
    for attack in dict.fromkeys(stats["attack"]):
        rows = stats[stats["attack"] == attack]
        baselines = {
            _float(row["epsilon"]): row for _, row in rows[rows["model"] == BASELINE].iterrows()
        }
        robust = rows[rows["model"] == ROBUST]
        for _, row in robust.sort_values("epsilon", kind="stable").iterrows():
            epsilon = _float(row["epsilon"])
            if epsilon not in baselines:
                raise ValueError(f"no baseline row for {attack} at epsilon {epsilon:g}")
            records.append(
                score(
                    _measurement(baselines[epsilon], basis),
                    _measurement(row, basis),
                    thresholds,
                )
            )
    return records


def rcti_frame(records: Iterable[RctiRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "attack": record.attack,
                "epsilon": record.epsilon,
                "delta_r": record.delta_r,
                "delta_c": record.delta_c,
                "rcti": record.rcti,
                "elasticity": record.elasticity.value,
                "no_change": record.no_change,
            }
            for record in records
        ],
        columns=RCTI_COLUMNS,
    )


def write_rcti(records: Iterable[RctiRecord], path: PathLike) -> Path:
    return _write(rcti_frame(records), path)


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text not in ("true", "false"):
        raise ValueError(f"not a boolean: {value!r}")
    return text == "true"


def read_rcti(path: PathLike) -> List[RctiRecord]:
    """Read records written by :func:`write_rcti`."""
    frame = _read(path, RCTI_COLUMNS[:-1])
    records = []
    for number, row in frame.iterrows():
        try:
            records.append(
                RctiRecord(
                    epsilon=_float(row["epsilon"]),
                    delta_r=_float(row["delta_r"]),
                    delta_c=_float(row["delta_c"]),
                    rcti=_float(row["rcti"]),
                    elasticity=ElasticityClass(row["elasticity"]),
                    no_change=_bool(row["no_change"]) if "no_change" in frame.columns else False,
                    attack=str(row["attack"]),
                )
            )
        except (TypeError, ValueError) as err:
            raise ValueError(f"{path}: row {number + 1}: {err}") from err
    return records


def figure_frames(records: Sequence[RctiRecord]) -> Dict[str, pd.DataFrame]:
    """Plot-ready epsilon/value tables; infinite values are drawn as 0 and flagged."""
    frames = {}
    for name in FIGURES:
        rows = []
        for record in records:
            value = getattr(record, name)
            infinite = math.isinf(value)
            rows.append(
                {
                    "attack": record.attack,
                    "epsilon": record.epsilon,
                    "value": 0.0 if infinite else value,
                    "was_infinite": infinite,
                }
            )
        frames[name] = pd.DataFrame(rows, columns=FIGURE_COLUMNS)
    return frames


def write_figure_data(records: Sequence[RctiRecord], directory: PathLike) -> List[Path]:
    """Write ``delta_r.csv``, ``delta_c.csv`` and ``rcti.csv`` under ``directory``."""
    directory = Path(directory)
    return [
        _write(frame, directory / f"{name}.csv")
        for name, frame in figure_frames(records).items()
    ]


def _cell(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "∞"
        if math.isnan(value):
            return "n/a"
        return f"{value:.5g}"
    return str(value)


def markdown_table(frame: pd.DataFrame) -> str:
    """GitHub-flavored markdown for a small frame."""
    lines = [
        "| " + " | ".join(frame.columns) + " |",
        "|" + "---|" * len(frame.columns),
    ]
    for row in frame.itertuples(index=False):
        lines.append("| " + " | ".join(_cell(value) for value in row) + " |")
    return "\n".join(lines)


def write_report(
    stats: pd.DataFrame,
    records: Sequence[RctiRecord],
    path: PathLike,
    recommendation: RctiRecord = None,
) -> Path:
    """Human-readable report with the stats and RCTI tables."""
    path = Path(path)
    table = stats.copy()
    table["accuracy"] = table["accuracy"] * 100
    table = table.rename(columns={"accuracy": "accuracy_%"}).drop(columns=["spans"])
    sections = ["# Robustness vs. carbon", "", "## Model statistics", "", markdown_table(table)]
    if records:
        sections += ["", "## RCTI", "", markdown_table(rcti_frame(records))]
    if recommendation is not None:
        sections += [
            "",
            f"Recommended trade-off: {recommendation.attack} robust model at "
            f"epsilon {recommendation.epsilon:g} "
            f"(RCTI {_cell(recommendation.rcti)}, {recommendation.elasticity.value}).",
        ]
    elif records:
        sections += ["", "No robust model improves on the baseline."]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(sections) + "\n", encoding="utf-8")
    return path

"""Module for the run manifest written next to an experiment's outputs."""
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from .energy import EnergyReport, host_snapshot
from .rcti import RctiRecord
from .utils import write_json

logger = logging.getLogger(__name__)

RUNNING = "running"
COMPLETE = "complete"
FAILED = "failed"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def record_dict(record: RctiRecord) -> Dict[str, Any]:
    return {
        "attack": record.attack,
        "epsilon": record.epsilon,
        "delta_r": record.delta_r,
        "delta_c": record.delta_c,
        "rcti": record.rcti,
        "elasticity": record.elasticity.value,
        "no_change": record.no_change,
    }


@dataclass
class RunManifest:
    """Record of one experiment: settings, spans, artifacts and scores.

    Artifacts are added only after they are written, so a manifest of a
    failed run still references existing files only.
    """

    version: str
    config: Dict[str, Any]
    hardware: Dict[str, Any]
    utilization: str
    host: Dict[str, Any] = field(default_factory=host_snapshot)
    status: str = RUNNING
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    spans: List[Dict[str, Any]] = field(default_factory=list)
    models: Dict[str, str] = field(default_factory=dict)
    tables: Dict[str, str] = field(default_factory=dict)
    rcti: List[Dict[str, Any]] = field(default_factory=list)
    recommendation: Optional[Dict[str, Any]] = None

    def add_spans(self, reports: List[EnergyReport]) -> None:
        self.spans = [{**report.as_row(), "samples": report.samples} for report in reports]

    def add_artifact(self, kind: str, name: str, path: Path) -> None:
        getattr(self, kind)[name] = str(path)

    def add_scores(self, records: List[RctiRecord], best: Optional[RctiRecord]) -> None:
        self.rcti = [record_dict(record) for record in records]
        self.recommendation = record_dict(best) if best is not None else None

    def complete(self) -> None:
        self.status = COMPLETE
        self.finished_at = _now()

    def fail(self, stage: str, message: str) -> None:
        self.status = FAILED
        self.failed_stage = stage
        self.error = message
        self.finished_at = _now()

    def write(self, path: Path) -> Path:
        path = write_json(asdict(self), path)
        logger.info("Manifest (%s) written to %s", self.status, path)
        return path

"""Module to meter energy and carbon emissions of labeled pipeline spans.

Energy comes from a power model rather than hardware counters:

- CPU: ``cpu_power_w`` times the sampled utilization fraction, integrated
  with the rectangle rule over the sampling intervals.
- RAM: ``ram_gb * ram_w_per_gb`` watts for the whole span.

Emissions follow ``C * E``: grams of CO2 are the carbon intensity (g/kWh)
times the total energy (kWh).
"""
from contextlib import contextmanager
from dataclasses import dataclass, field
import logging
import platform
import threading
import time
from typing import Callable, Dict, Iterator, List, Optional, Protocol, Tuple

import psutil

logger = logging.getLogger(__name__)

JOULES_PER_KWH = 3.6e6
DEFAULT_CPU_POWER_W = 42.5
DEFAULT_RAM_W_PER_GB = 0.375
DEFAULT_CARBON_INTENSITY = 475.0
DEFAULT_SAMPLE_INTERVAL_S = 0.1


class SpanError(RuntimeError):
    """A span was opened twice under one label, or stopped twice."""


def detect_ram_gb() -> float:
    """Total physical memory of this host in GB."""
    return psutil.virtual_memory().total / 1024**3


@dataclass(frozen=True)
class HardwareProfile:
    """Power-model constants and grid carbon intensity."""

    cpu_power_w: float = DEFAULT_CPU_POWER_W
    ram_gb: float = field(default_factory=detect_ram_gb)
    ram_w_per_gb: float = DEFAULT_RAM_W_PER_GB
    carbon_intensity_g_per_kwh: float = DEFAULT_CARBON_INTENSITY

    def __post_init__(self):
        for name in (
            "cpu_power_w",
            "ram_gb",
            "ram_w_per_gb",
            "carbon_intensity_g_per_kwh",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def ram_power_w(self) -> float:
        return self.ram_gb * self.ram_w_per_gb


@dataclass(frozen=True)
class EnergyReport:
    """Metered energy and emissions of one closed span."""

    label: str
    duration_s: float
    cpu_energy_kwh: float
    ram_energy_kwh: float
    total_energy_kwh: float
    emissions_g: float
    samples: int
    profile: HardwareProfile

    def as_row(self) -> Dict[str, object]:
        """Row for the per-span CSV."""
        return {
            "span_label": self.label,
            "duration_s": self.duration_s,
            "cpu_kwh": self.cpu_energy_kwh,
            "ram_kwh": self.ram_energy_kwh,
            "total_kwh": self.total_energy_kwh,
            "emissions_g": self.emissions_g,
        }


def compute_emissions(energy_kwh: float, carbon_intensity_g_per_kwh: float) -> float:
    """Grams of CO2 for ``energy_kwh`` at the given carbon intensity."""
    if energy_kwh < 0 or carbon_intensity_g_per_kwh < 0:
        raise ValueError("energy and carbon intensity must not be negative")
    return carbon_intensity_g_per_kwh * energy_kwh


def summarize(
    label: str,
    duration_s: float,
    cpu_joules: float,
    profile: HardwareProfile,
    samples: int = 0,
) -> EnergyReport:
    """Build a report from a duration and integrated CPU joules."""
    cpu_kwh = cpu_joules / JOULES_PER_KWH
    ram_kwh = profile.ram_power_w * duration_s / JOULES_PER_KWH
    total_kwh = cpu_kwh + ram_kwh
    return EnergyReport(
        label=label,
        duration_s=duration_s,
        cpu_energy_kwh=cpu_kwh,
        ram_energy_kwh=ram_kwh,
        total_energy_kwh=total_kwh,
        emissions_g=compute_emissions(total_kwh, profile.carbon_intensity_g_per_kwh),
        samples=samples,
        profile=profile,
    )


class UtilizationSource(Protocol):
    """Fraction of the CPU package used by this process, in [0, 1]."""

    name: str

    def __call__(self) -> float:
        ...


class ConstantUtilization:
    """Fixed utilization, for reproducible metering on any host."""

    def __init__(self, fraction: float = 1.0):
        if not 0.0 <= fraction <= 1.0:
            raise ValueError("utilization fraction must lie in [0, 1]")
        self.fraction = fraction
        self.name = f"constant({fraction:g})"

    def __call__(self) -> float:
        return self.fraction


class ProcessUtilization:
    """This process's share of all logical CPUs, sampled with psutil."""

    name = "process"

    def __init__(self):
        self.process = psutil.Process()
        self.cpus = psutil.cpu_count() or 1
        # the first cpu_percent call only primes the counter
        self.process.cpu_percent(interval=None)

    def __call__(self) -> float:
        percent = self.process.cpu_percent(interval=None)
        return min(1.0, max(0.0, percent / (100.0 * self.cpus)))


def make_utilization_source(kind: str) -> UtilizationSource:
    """``process`` when psutil can read this process, else constant 1.0."""
    if kind == "constant":
        return ConstantUtilization(1.0)
    if kind != "process":
        raise ValueError(f"Unknown utilization source: {kind}")
    try:
        return ProcessUtilization()
    except (psutil.Error, OSError) as err:
        logger.warning("Process utilization unavailable (%s); using constant 1.0", err)
        return ConstantUtilization(1.0)


class SpanHandle:
    """An open metered span; close it with :meth:`EnergyTracker.stop_span`."""

    def __init__(
        self,
        label: str,
        profile: HardwareProfile,
        clock: Callable[[], float],
        utilization: UtilizationSource,
        interval_s: float,
    ):
        self.label = label
        self.profile = profile
        self._clock = clock
        self._utilization = utilization
        self._interval_s = interval_s
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._samples: List[Tuple[float, float]] = []
        self.start = clock()
        self._last = self.start
        self._cpu_joules = 0.0
        self.report: Optional[EnergyReport] = None
        self._sampler = threading.Thread(
            target=self._run, name=f"energy-sampler[{label}]", daemon=True
        )
        self._sampler.start()

    def _sample(self) -> None:
        with self._lock:
            fraction = self._utilization()
            now = self._clock()
            elapsed = max(0.0, now - self._last)
            self._cpu_joules += self.profile.cpu_power_w * fraction * elapsed
            self._samples.append((now, fraction))
            self._last = max(now, self._last)

    def _run(self) -> None:
        while not self._stop.wait(self._interval_s):
            self._sample()

    @property
    def closed(self) -> bool:
        return self.report is not None

    def close(self) -> EnergyReport:
        self._stop.set()
        self._sampler.join()
        self._sample()
        with self._lock:
            duration = max(0.0, self._last - self.start)
            self.report = summarize(
                self.label, duration, self._cpu_joules, self.profile, len(self._samples)
            )
        return self.report


class EnergyTracker:
    """Opens and closes metered spans and keeps their reports in order.

    Parameters
    ----------
    profile: HardwareProfile
        Default profile for spans started without one.
    utilization: UtilizationSource
        Sampled once per interval while a span is open.
    interval_s: float
        Sampling interval in seconds.
    clock: Callable
        Monotonic clock in seconds; replaceable in tests.
    """

    def __init__(
        self,
        profile: Optional[HardwareProfile] = None,
        utilization: Optional[UtilizationSource] = None,
        interval_s: float = DEFAULT_SAMPLE_INTERVAL_S,
        clock: Callable[[], float] = time.perf_counter,
    ):
        if interval_s <= 0:
            raise ValueError("sampling interval must be positive")
        self.profile = profile or HardwareProfile()
        self.utilization = utilization or ConstantUtilization(1.0)
        self.interval_s = interval_s
        self.clock = clock
        self.reports: List[EnergyReport] = []
        self._open: Dict[str, SpanHandle] = {}
        self._lock = threading.Lock()

    def start_span(self, label: str, profile: Optional[HardwareProfile] = None) -> SpanHandle:
        """Start metering a span; labels must be unique among open spans."""
        with self._lock:
            if label in self._open:
                raise SpanError(f"span already open: {label}")
            handle = SpanHandle(
                label,
                profile or self.profile,
                self.clock,
                self.utilization,
                self.interval_s,
            )
            self._open[label] = handle
        logger.debug("Span started: %s", label)
        return handle

    def stop_span(self, handle: SpanHandle) -> EnergyReport:
        """Stop a span and return its immutable report."""
        with self._lock:
            if handle.closed or self._open.get(handle.label) is not handle:
                raise SpanError(f"span not open: {handle.label}")
            del self._open[handle.label]
        report = handle.close()
        self.reports.append(report)
        logger.info(
            "Span %s: %.3f s, %.3e kWh, %.3e g CO2",
            report.label,
            report.duration_s,
            report.total_energy_kwh,
            report.emissions_g,
        )
        return report

    @contextmanager
    def metered(self, label: str) -> Iterator[SpanHandle]:
        """Meter the enclosed block; the report is on ``handle.report`` afterwards."""
        handle = self.start_span(label)
        try:
            yield handle
        finally:
            self.stop_span(handle)


def host_snapshot() -> Dict[str, object]:
    """Host facts recorded next to the hardware profile."""
    return {
        "logical_cpus": psutil.cpu_count(),
        "physical_cpus": psutil.cpu_count(logical=False),
        "ram_gb": round(detect_ram_gb(), 5),
        "platform": platform.platform(),
        "processor": platform.processor(),
    }

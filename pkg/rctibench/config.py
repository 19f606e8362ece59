"""Module for run configuration files.

The format is line oriented::

    # comment
    data.train_images = mnist/train-images-idx3-ubyte.gz
    [train]
    epochs = 3

A ``[section]`` header prefixes the keys that follow it. Every key is
declared in ``CONFIG_KEYS`` with its type, default and help text, which is
also what ``--help`` prints.
"""
from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, NamedTuple, Optional, Tuple, Union

from .attacks import AttackKind, AttackSpec, DEFAULT_PGD_STEPS
from .energy import (
    DEFAULT_CARBON_INTENSITY,
    DEFAULT_CPU_POWER_W,
    DEFAULT_RAM_W_PER_GB,
    DEFAULT_SAMPLE_INTERVAL_S,
    HardwareProfile,
)
from .rcti import (
    DEFAULT_CRITICAL_THRESHOLD,
    DEFAULT_TOLERANCE,
    CarbonBasis,
    Thresholds,
)
from .training import TrainConfig

logger = logging.getLogger(__name__)

MAX_GRID_EPSILON = 0.5
DEFAULT_EPSILON_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


class ConfigError(ValueError):
    """Unknown key, malformed value or out-of-range setting."""


class ConfigKey(NamedTuple):
    """Declaration of one configuration key."""

    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be a positive integer")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError("must not be negative")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise ValueError("must be positive")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise ValueError("must lie in [0, 1]")
    return value


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("yes", "y", "true", "t", "1", "on"):
        return True
    if lowered in ("no", "n", "false", "f", "0", "off"):
        return False
    raise ValueError(f"{text!r} is not a recognized boolean")


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse_optional(text: str):
        return None if text.strip() == "" else parse(text)

    return parse_optional


def _grid_epsilon(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= MAX_GRID_EPSILON:
        raise ValueError(f"epsilon {value:g} outside [0, {MAX_GRID_EPSILON}]")
    return value


def _epsilon_grid(text: str) -> Tuple[float, ...]:
    grid = tuple(_grid_epsilon(part) for part in text.split(",") if part.strip())
    if not grid:
        raise ValueError("epsilon grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("epsilon grid must be strictly ascending")
    return grid


def _attack_kinds(text: str) -> Tuple[AttackKind, ...]:
    kinds = tuple(AttackKind.parse(part) for part in text.split(",") if part.strip())
    if not kinds:
        raise ValueError("no attack kind given")
    if len(set(kinds)) != len(kinds):
        raise ValueError("attack kinds repeat")
    return kinds


def _choice(*choices: str) -> Callable[[str], str]:
    def parse_choice(text: str) -> str:
        value = text.strip()
        if value not in choices:
            raise ValueError(f"{value!r} is not one of {', '.join(choices)}")
        return value

    return parse_choice


def _architecture(text: str) -> str:
    # late import keeps presets out of the config import graph for --help
    from .presets import PRESETS

    return _choice(*PRESETS)(text)


CONFIG_KEYS: Dict[str, ConfigKey] = {
    key.name: key
    for key in (
        ConfigKey("data.train_images", str, "", "training images IDX file (.gz ok)"),
        ConfigKey("data.train_labels", str, "", "training labels IDX file (.gz ok)"),
        ConfigKey("data.test_images", str, "", "test images IDX file (.gz ok)"),
        ConfigKey("data.test_labels", str, "", "test labels IDX file (.gz ok)"),
        ConfigKey("data.train_size", _positive_int, 10000, "seeded training subset size"),
        ConfigKey("data.test_size", _positive_int, 2000, "seeded test subset size"),
        ConfigKey("model.architecture", _architecture, "mlp", "preset: mlp or cnn-small"),
        ConfigKey("train.epochs", _non_negative_int, 2, "training epochs"),
        ConfigKey("train.batch_size", _positive_int, 64, "SGD batch size"),
        ConfigKey("train.learning_rate", _positive_float, 0.1, "SGD learning rate"),
        ConfigKey(
            "train.adversarial_ratio",
            _fraction,
            0.5,
            "fraction of each robust-training batch replaced by attack outputs",
        ),
        ConfigKey("attack.kind", _attack_kinds, (AttackKind.FG,), "FG, PGD or FG,PGD"),
        ConfigKey(
            "attack.epsilon_grid",
            _epsilon_grid,
            DEFAULT_EPSILON_GRID,
            "ascending epsilons in [0, 0.5]",
        ),
        ConfigKey(
            "attack.epsilon",
            _grid_epsilon,
            0.1,
            "epsilon for train-robust and attack-eval",
        ),
        ConfigKey("attack.steps", _positive_int, DEFAULT_PGD_STEPS, "PGD iterations"),
        ConfigKey(
            "attack.step_size",
            _optional(_positive_float),
            None,
            "PGD step size (empty: epsilon / 4)",
        ),
        ConfigKey(
            "attack.random_start",
            _bool,
            False,
            "PGD random start at evaluation (training always starts randomly)",
        ),
        ConfigKey(
            "attack.sweep_fixed_epsilon",
            _optional(_grid_epsilon),
            None,
            "train one robust model at this epsilon and sweep it over the grid",
        ),
        ConfigKey("hardware.cpu_power_w", _positive_float, DEFAULT_CPU_POWER_W, "CPU watts"),
        ConfigKey(
            "hardware.ram_gb",
            _optional(_positive_float),
            None,
            "RAM size in GB (empty: detected)",
        ),
        ConfigKey(
            "hardware.ram_w_per_gb",
            _positive_float,
            DEFAULT_RAM_W_PER_GB,
            "RAM watts per GB",
        ),
        ConfigKey(
            "hardware.carbon_intensity_g_per_kwh",
            _positive_float,
            DEFAULT_CARBON_INTENSITY,
            "grid carbon intensity, g CO2 per kWh",
        ),
        ConfigKey(
            "hardware.sample_interval_s",
            _positive_float,
            DEFAULT_SAMPLE_INTERVAL_S,
            "utilization sampling interval, seconds",
        ),
        ConfigKey(
            "hardware.utilization",
            _choice("process", "constant"),
            "process",
            "utilization source: process or constant",
        ),
        ConfigKey(
            "rcti.critical_threshold",
            _positive_float,
            DEFAULT_CRITICAL_THRESHOLD,
            "RCTI above this is Eco-Critical",
        ),
        ConfigKey(
            "rcti.tolerance",
            _fraction,
            DEFAULT_TOLERANCE,
            "equality tolerance for Eco-Neutral and Eco-Ideal",
        ),
        ConfigKey(
            "rcti.carbon_basis",
            _choice("energy", "emissions"),
            "energy",
            "carbon measure for dC: energy or emissions",
        ),
        ConfigKey(
            "rcti.include_training_energy",
            _bool,
            False,
            "add the training span to each row's carbon",
        ),
        ConfigKey("output.directory", str, "runs/latest", "directory for all outputs"),
        ConfigKey("seed", int, 0, "seed for every random draw"),
    )
}


@dataclass(frozen=True)
class DataSettings:
    """Dataset paths and desk-scale subset sizes."""

    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    train_size: int
    test_size: int

    def require(self, *names: str) -> None:
        missing = [f"data.{name}" for name in names if not getattr(self, name)]
        if missing:
            raise ConfigError(f"not set: {', '.join(missing)}")


@dataclass(frozen=True)
class AttackSettings:
    """Attack families, epsilon grid and PGD parameters."""

    kinds: Tuple[AttackKind, ...]
    epsilon_grid: Tuple[float, ...]
    epsilon: float
    steps: int
    step_size: Optional[float]
    random_start: bool
    sweep_fixed_epsilon: Optional[float]

    def spec(self, kind: AttackKind, epsilon: float) -> AttackSpec:
        """Evaluation-time attack spec for one family and strength."""
        return AttackSpec(
            kind=kind,
            epsilon=epsilon,
            step_size=self.step_size,
            num_steps=self.steps,
            random_start=self.random_start,
        )


@dataclass(frozen=True)
class MeterSettings:
    """Power model plus sampler settings."""

    profile: HardwareProfile
    sample_interval_s: float
    utilization: str


@dataclass(frozen=True)
class RctiSettings:
    """Scoring thresholds and span policy."""

    thresholds: Thresholds
    carbon_basis: CarbonBasis
    include_training_energy: bool


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs, parsed and validated."""

    data: DataSettings
    train: TrainConfig
    attack: AttackSettings
    meter: MeterSettings
    rcti: RctiSettings
    output_directory: Path
    seed: int
    values: Tuple[Tuple[str, Any], ...] = ()

    def snapshot(self) -> Dict[str, Any]:
        """JSON-ready copy of every key's effective value."""

        def plain(value):
            if isinstance(value, tuple):
                return [plain(item) for item in value]
            if isinstance(value, AttackKind):
                return value.value
            return value

        return {name: plain(value) for name, value in self.values}


def _split_assignment(line: str, where: str) -> Tuple[str, str]:
    if "=" not in line:
        raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
    key, value = line.split("=", 1)
    return key.strip(), value.strip()


def read_assignments(text: str, source: str = "<config>") -> Dict[str, str]:
    """Raw ``key -> value`` strings from config text, sections applied."""
    assignments: Dict[str, str] = {}
    section = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{number}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        key, value = _split_assignment(line, where)
        if section:
            key = f"{section}.{key}"
        if key in assignments:
            logger.warning("%s: %s set again; the later value wins", where, key)
        assignments[key] = value
    return assignments


def build_config(assignments: Dict[str, str]) -> RunConfig:
    """Apply defaults and parse each value by its declared type."""
    unknown = sorted(set(assignments) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    values: Dict[str, Any] = {}
    for name, key in CONFIG_KEYS.items():
        if name not in assignments:
            values[name] = key.default
            continue
        try:
            values[name] = key.parse(assignments[name])
        except ValueError as err:
            raise ConfigError(f"{name} = {assignments[name]!r}: {err}") from err

    try:
        profile_args = {
            "cpu_power_w": values["hardware.cpu_power_w"],
            "ram_w_per_gb": values["hardware.ram_w_per_gb"],
            "carbon_intensity_g_per_kwh": values["hardware.carbon_intensity_g_per_kwh"],
        }
        if values["hardware.ram_gb"] is not None:
            profile_args["ram_gb"] = values["hardware.ram_gb"]
        profile = HardwareProfile(**profile_args)
        thresholds = Thresholds(values["rcti.critical_threshold"], values["rcti.tolerance"])
        train = TrainConfig(
            epochs=values["train.epochs"],
            batch_size=values["train.batch_size"],
            learning_rate=values["train.learning_rate"],
            adversarial_ratio=values["train.adversarial_ratio"],
            seed=values["seed"],
            architecture=values["model.architecture"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err
    values["hardware.ram_gb"] = profile.ram_gb

    return RunConfig(
        data=DataSettings(
            values["data.train_images"],
            values["data.train_labels"],
            values["data.test_images"],
            values["data.test_labels"],
            values["data.train_size"],
            values["data.test_size"],
        ),
        train=train,
        attack=AttackSettings(
            kinds=values["attack.kind"],
            epsilon_grid=values["attack.epsilon_grid"],
            epsilon=values["attack.epsilon"],
            steps=values["attack.steps"],
            step_size=values["attack.step_size"],
            random_start=values["attack.random_start"],
            sweep_fixed_epsilon=values["attack.sweep_fixed_epsilon"],
        ),
        meter=MeterSettings(
            profile,
            values["hardware.sample_interval_s"],
            values["hardware.utilization"],
        ),
        rcti=RctiSettings(
            thresholds,
            CarbonBasis(values["rcti.carbon_basis"]),
            values["rcti.include_training_energy"],
        ),
        output_directory=Path(values["output.directory"]),
        seed=values["seed"],
        values=tuple(values.items()),
    )


def parse_overrides(overrides: Iterable[str]) -> Dict[str, str]:
    """``key=value`` strings from ``--set`` flags."""
    return dict(_split_assignment(item, "--set") for item in overrides)


def parse_config(
    path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()
) -> RunConfig:
    """Read a config file (if any), apply overrides, and validate."""
    assignments: Dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        assignments = read_assignments(path.read_text(encoding="utf-8"), str(path))
    assignments.update(parse_overrides(overrides))
    return build_config(assignments)


def format_default(value: Any) -> str:
    """Render a default the way it would be written in a config file."""
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(format_default(item) for item in value)
    if isinstance(value, AttackKind):
        return value.value
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)

"""Command line entry point: ``rctibench <command> [options]``."""
import argparse
import logging
import sys
from typing import List, Optional

from . import __version__
from .common import StageError
from .config import ConfigError, parse_config
from .harness import RctiBench
from .help import RctiHelp, config_keys_help

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", metavar="PATH", help="config file of key = value lines")
    parent.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        dest="overrides",
        help="override one config key (repeatable)",
    )
    parent.add_argument("--seed", type=int, help="shortcut for --set seed=N")
    parent.add_argument("--output", metavar="DIR", help="shortcut for --set output.directory=DIR")
    parent.add_argument(
        "--include-training-energy",
        action="store_true",
        help="shortcut for --set rcti.include_training_energy=true",
    )
    parent.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level",
    )
    return parent


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="rctibench",
        description="Measure the robustness-carbon trade-off of adversarial training.",
        epilog=config_keys_help(),
        formatter_class=RctiHelp,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return commands.add_parser(
            name,
            parents=[common],
            help=help_text,
            description=help_text,
            epilog=config_keys_help(),
            formatter_class=RctiHelp,
        )

    add("experiment", "train, attack, meter and score over the epsilon grid")
    rcti = add("rcti", "re-score a stats CSV into rcti.csv")
    rcti.add_argument("stats_csv", help="stats.csv from an experiment or a transcription")
    rcti.add_argument("--out", metavar="PATH", help="output CSV (default: <output>/rcti.csv)")
    figure = add("figure-data", "write plot-ready CSVs from rcti.csv")
    figure.add_argument("rcti_csv", help="rcti.csv to convert")
    figure.add_argument("--out", metavar="DIR", help="output directory (default: <output>/figures)")
    add("train-baseline", "train and save the baseline model")
    add("train-robust", "adversarially train and save one model at attack.epsilon")
    attack = add("attack-eval", "evaluate a saved model under attack at attack.epsilon")
    attack.add_argument("model", help="model file written by a train command")
    return parser


def _overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.output is not None:
        overrides.append(f"output.directory={args.output}")
    if args.include_training_energy:
        overrides.append("rcti.include_training_energy=true")
    return overrides


def run(args: argparse.Namespace) -> None:
    bench = RctiBench(parse_config(args.config, _overrides(args)))
    if args.command == "experiment":
        manifest = bench.cmd_experiment()
        print(f"{manifest.status}: {bench.output_dir / 'manifest.json'}")
    elif args.command == "rcti":
        for record in bench.cmd_rcti(args.stats_csv, args.out):
            print(
                f"{record.attack} eps={record.epsilon:g} dR={record.delta_r:.5g} "
                f"dC={record.delta_c:.5g} RCTI={record.rcti:.5g} {record.elasticity.value}"
            )
    elif args.command == "figure-data":
        for path in bench.cmd_figure_data(args.rcti_csv, args.out):
            print(path)
    elif args.command == "train-baseline":
        print(bench.cmd_train_baseline().path)
    elif args.command == "train-robust":
        print(bench.cmd_train_robust().path)
    elif args.command == "attack-eval":
        for measured in bench.cmd_attack_eval(args.model):
            print(
                f"{measured.kind.value} eps={measured.epsilon:g} "
                f"accuracy={measured.accuracy:.4f}"
            )
            for report in measured.reports:
                print(
                    f"  {report.label}: {report.duration_s:.3f} s, "
                    f"{report.total_energy_kwh:.3e} kWh, {report.emissions_g:.3e} g CO2"
                )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        run(args)
    except ConfigError as err:
        print(f"error: config: {err}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as err:
        print(f"error: {err.stage}: {err.message}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as err:
        logger.error("%s", err)
        print(f"error: io: {err}", file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())

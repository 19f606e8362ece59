"""Custom help module.

The ``--help`` epilog lists every configuration key with its default, built
from :data:`rctibench.config.CONFIG_KEYS` so the help never drifts from the
parser.
"""
import argparse
from itertools import groupby

from .config import CONFIG_KEYS, format_default

KEY_WIDTH = 36


def config_keys_help() -> str:
    """Config keys grouped by section, each with its default and help text."""
    lines = ["configuration keys (--config FILE, --set key=value):"]
    by_section = groupby(CONFIG_KEYS.values(), key=lambda key: key.name.split(".")[0])
    for section, keys in by_section:
        lines.append(f"  [{section}]")
        for key in keys:
            default = format_default(key.default)
            name = f"{key.name} = {default}" if default else f"{key.name} ="
            lines.append(f"    {name:<{KEY_WIDTH}} {key.help}")
    return "\n".join(lines)


class RctiHelp(argparse.RawDescriptionHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    """Keeps the preformatted key table and shows option defaults."""

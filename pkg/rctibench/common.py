"""Module for common code."""
from contextlib import contextmanager
from functools import wraps
import logging
from typing import Iterator

from .config import ConfigError

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message


def make_decorator(function):
    """Make a decorator that has arguments."""

    @wraps(function)
    def wrap_make_decorator(*args, **kwargs):
        if len(args) == 1 and (not kwargs) and callable(args[0]):
            # i.e. called as @make_decorator
            return function(args[0])
        # i.e. called as @make_decorator(*args, **kwargs)
        return lambda wrapped_function: function(wrapped_function, *args, **kwargs)

    return wrap_make_decorator


def _passes_through(err: BaseException) -> bool:
    return isinstance(err, (StageError, ConfigError))


@contextmanager
def running_stage(name: str) -> Iterator[None]:
    """Re-raise any failure in the block as a :class:`StageError` for ``name``."""
    try:
        yield
    except Exception as err:  # pylint: disable=broad-except
        if _passes_through(err):
            raise
        logger.error("Stage %s failed: %s", name, err)
        raise StageError(name, str(err) or type(err).__name__) from err


@make_decorator
def stage(function, name: str = None):
    """Run a whole command as one stage, named after the command by default."""
    stage_name = name or function.__name__.removeprefix("cmd_").replace("_", "-")

    @wraps(function)
    def wrap_stage(*args, **kwargs):
        with running_stage(stage_name):
            return function(*args, **kwargs)

    return wrap_stage

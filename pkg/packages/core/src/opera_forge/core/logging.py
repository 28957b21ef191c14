"""Logging setup for the command-line entry point."""

import logging

from rich.console import Console
from rich.logging import RichHandler

from opera_forge.config.config import LoggingSettings


def setup_logging(settings: LoggingSettings) -> None:
    """Install a RichHandler on the root logger, writing to stderr.

    Calling it again replaces the previous handler, so the CLI callback can
    run once per invocation inside a test runner.
    """
    handler = RichHandler(
        console=Console(stderr=True),
        show_time=settings.show_time,
        show_path=settings.show_path,
        rich_tracebacks=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))

    root = logging.getLogger()
    for existing in list(root.handlers):
        if isinstance(existing, RichHandler):
            root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(settings.get_level_int())

"""``python -m accboed`` dispatches to the command-line interface."""

from .cli import entry_point

entry_point()

"""HTTP service and command line."""

from .cli import main  # noqa: F401

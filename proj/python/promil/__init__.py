"""Percentage-based multiple instance learning with a trainable Bernstein quantile."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401

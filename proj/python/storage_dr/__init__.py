"""Online storage control for demand response: ESM, DR-ESM and a greedy baseline."""

from ._core import *  # noqa: F401,F403

__version__ = "0.1.0"

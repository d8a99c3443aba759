"""Data-parallel pipelines on a software-modeled PIM machine."""

from ._pimflow import *  # noqa: F401,F403
from ._pimflow import __doc__  # noqa: F401

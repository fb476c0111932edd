"""Offline figure renderer for moerl training logs.

The only coupling to the training stack is the run-log CSV schema; see
frames.EXPECTED_HEADER for the full contract.
"""

from .frames import EXPECTED_HEADER, Run, group_runs, load_run
from .render import KINDS, build_figures, render

__all__ = [
    "EXPECTED_HEADER", "Run", "group_runs", "load_run",
    "KINDS", "build_figures", "render",
]

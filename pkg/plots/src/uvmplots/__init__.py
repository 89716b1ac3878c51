"""Static figure rendering for the memory simulator's CSV reports."""

from .figures import (COMPARE_HEADER, FIGURE_KINDS, ITERATIONS_HEADER,
                      SWEEP_HEADER, TIMELINE_HEADER, SchemaError,
                      per_iteration_figure, read_csv, render,
                      speedup_lines_figure, sweep_bars_figure,
                      timeline_figure)

__all__ = [
    "COMPARE_HEADER", "FIGURE_KINDS", "ITERATIONS_HEADER", "SWEEP_HEADER",
    "TIMELINE_HEADER", "SchemaError", "per_iteration_figure", "read_csv",
    "render", "speedup_lines_figure", "sweep_bars_figure", "timeline_figure",
]

__version__ = "0.1.0"

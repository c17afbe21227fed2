"""Figure rendering for calibration-harness result CSVs.

This package reads the CSV files written by the ``blindcal`` command and
renders summary figures.  It deliberately has no dependency on the harness
package itself: the CSV is the only interface.
"""

from blindcal_plot.figures import (
    FIGURE_KINDS,
    KIND_SCENARIOS,
    PlotError,
    PlotSpec,
    ResultTable,
    load_table,
    render,
)

__all__ = [
    "FIGURE_KINDS",
    "KIND_SCENARIOS",
    "PlotError",
    "PlotSpec",
    "ResultTable",
    "load_table",
    "render",
]

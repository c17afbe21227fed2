"""CSV loading and figure rendering.

The input contract is the harness CSV schema (one header line, one row per
scenario result).  Aggregation — per-x means and trial spread — happens
here, so the CSVs can stay archival, one row per trial.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from matplotlib.figure import Figure

REQUIRED_COLUMNS = (
    "scenario",
    "length_km",
    "trial",
    "metric",
    "value_uncalibrated",
    "value_calibrated",
    "iterations_used",
    "shots",
    "seed",
)

# Which harness scenarios each figure kind can draw.  `length_sweep` serves
# both length-sweep families (sifted QBER and swap error rate), so the four
# kinds cover five scenario/kind pairings.
KIND_SCENARIOS: Dict[str, Tuple[str, ...]] = {
    "iterations_trace": ("random-states",),
    "length_sweep": ("bb84", "entswap"),
    "shots_sweep": ("bb84-shots",),
    "multipartite_grid": ("multipartite-ghz", "multipartite-w"),
}
FIGURE_KINDS = tuple(KIND_SCENARIOS)

_UNCAL_STYLE = dict(color="#c44e52", marker="o", label="uncalibrated")
_CAL_STYLE = dict(color="#4c72b0", marker="s", label="calibrated")


class PlotError(Exception):
    """Input CSV or plot specification is unusable; message says why."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: which CSV, which layout, where to write."""

    input_csv: str
    kind: str
    output_path: str

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise PlotError(
                f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}"
            )


@dataclass
class ResultTable:
    """Parsed CSV: one scenario, column-per-field arrays of equal length."""

    scenario: str
    length_km: np.ndarray
    trial: np.ndarray
    metric: List[str]
    value_uncalibrated: np.ndarray
    value_calibrated: np.ndarray
    iterations_used: np.ndarray
    shots: np.ndarray
    seed: np.ndarray
    path: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.metric)


def load_table(path: str) -> ResultTable:
    """Read a harness CSV; reject missing columns, empty tables, mixed scenarios."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            if missing:
                raise PlotError(f"{path}: missing columns: {', '.join(missing)}")
            rows = list(reader)
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise PlotError(f"{path}: no data rows")
    scenarios = sorted({r["scenario"] for r in rows})
    if len(scenarios) != 1:
        raise PlotError(f"{path}: mixed scenarios in one file: {scenarios}")
    try:
        return ResultTable(
            scenario=scenarios[0],
            length_km=np.array([float(r["length_km"]) for r in rows]),
            trial=np.array([int(r["trial"]) for r in rows]),
            metric=[r["metric"] for r in rows],
            value_uncalibrated=np.array(
                [float(r["value_uncalibrated"]) for r in rows]
            ),
            value_calibrated=np.array([float(r["value_calibrated"]) for r in rows]),
            iterations_used=np.array([int(r["iterations_used"]) for r in rows]),
            shots=np.array([int(r["shots"]) for r in rows]),
            seed=np.array([int(r["seed"]) for r in rows]),
            path=path,
        )
    except (TypeError, ValueError) as exc:
        raise PlotError(f"{path}: malformed row value: {exc}") from None


def _mean_and_spread(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per unique x: mean of y and standard deviation across rows."""
    levels = np.unique(x)
    means = np.array([float(np.mean(y[x == v])) for v in levels])
    spreads = np.array([float(np.std(y[x == v])) for v in levels])
    return levels, means, spreads


def _series(ax, x, mean, spread, style):
    ax.plot(x, mean, linestyle="-", markersize=5, **style)
    ax.fill_between(x, mean - spread, mean + spread, color=style["color"], alpha=0.2)


def _render_iterations_trace(table: ResultTable, fig: Figure):
    ax = fig.add_subplot(111)
    iters, mean, spread = _mean_and_spread(
        table.iterations_used, table.value_calibrated
    )
    _series(ax, iters, mean, spread, _CAL_STYLE | {"marker": None})
    baseline = float(np.mean(table.value_uncalibrated))
    ax.axhline(baseline, color=_UNCAL_STYLE["color"], linestyle="--",
               label="uncalibrated")
    ax.set_xlabel("protocol iteration")
    ax.set_ylabel(table.metric[0])
    ax.set_title(f"{table.scenario}: cost trace")
    ax.legend()
    ax.grid(True, alpha=0.3)


def _render_length_sweep(table: ResultTable, fig: Figure):
    ax = fig.add_subplot(111)
    for values, style in (
        (table.value_uncalibrated, _UNCAL_STYLE),
        (table.value_calibrated, _CAL_STYLE),
    ):
        lengths, mean, spread = _mean_and_spread(table.length_km, values)
        _series(ax, lengths, mean, spread, style)
    ax.set_xlabel("fiber length (km)")
    ax.set_ylabel(table.metric[0])
    ax.set_title(f"{table.scenario}: metric vs length")
    ax.legend()
    ax.grid(True, alpha=0.3)


def _render_shots_sweep(table: ResultTable, fig: Figure):
    ax = fig.add_subplot(111)
    for values, style in (
        (table.value_uncalibrated, _UNCAL_STYLE),
        (table.value_calibrated, _CAL_STYLE),
    ):
        shots, mean, spread = _mean_and_spread(table.shots.astype(float), values)
        _series(ax, shots, mean, spread, style)
    ax.set_xscale("log")
    ax.set_xlabel("states transmitted per iteration")
    ax.set_ylabel(table.metric[0])
    ax.set_title(f"{table.scenario}: metric vs transmission budget")
    ax.legend()
    ax.grid(True, alpha=0.3)


_METRIC_WIDTH = re.compile(r"_n(\d+)$")


def _render_multipartite_grid(table: ResultTable, fig: Figure):
    widths = []
    for m in table.metric:
        match = _METRIC_WIDTH.search(m)
        if match is None:
            raise PlotError(
                f"metric {m!r} carries no qubit-count suffix; "
                "expected e.g. infidelity_n3"
            )
        widths.append(int(match.group(1)))
    width_arr = np.array(widths)
    panels = sorted(set(widths))
    fig.set_size_inches(4.5 * len(panels), 4.8)
    for idx, n in enumerate(panels, start=1):
        ax = fig.add_subplot(1, len(panels), idx)
        mask = width_arr == n
        for values, style in (
            (table.value_uncalibrated, _UNCAL_STYLE),
            (table.value_calibrated, _CAL_STYLE),
        ):
            lengths, mean, spread = _mean_and_spread(
                table.length_km[mask], values[mask]
            )
            ax.errorbar(lengths, mean, yerr=spread, capsize=3, **style)
        ax.set_xlabel("fiber length (km)")
        if idx == 1:
            ax.set_ylabel("infidelity")
            ax.legend()
        ax.set_title(f"n = {n}")
        ax.grid(True, alpha=0.3)
    fig.suptitle(f"{table.scenario}: per-size calibration quality")


_RENDERERS = {
    "iterations_trace": _render_iterations_trace,
    "length_sweep": _render_length_sweep,
    "shots_sweep": _render_shots_sweep,
    "multipartite_grid": _render_multipartite_grid,
}


def render(spec: PlotSpec) -> str:
    """Render one figure; returns the output path.

    The input CSV is never modified, and rendering is deterministic: the
    same input bytes produce the same plotted values (and the same image
    bytes for a fixed matplotlib version).
    """
    table = load_table(spec.input_csv)
    allowed = KIND_SCENARIOS[spec.kind]
    if table.scenario not in allowed:
        raise PlotError(
            f"scenario {table.scenario!r} does not match figure kind "
            f"{spec.kind!r} (expected one of {allowed})"
        )
    fig = Figure(figsize=(6.4, 4.8))
    _RENDERERS[spec.kind](table, fig)
    fig.savefig(spec.output_path, dpi=150)
    return spec.output_path

"""Aggregate sweep CSVs and render them as line plots with deviation bands.

Input is the simulator's run-level CSV (one row per run, header row, status
column). Aggregation happens here, not in the simulator: the CSV stays the
raw record and figures are derived artifacts. Two figure kinds:

* order-size: mean return vs order size, one series per ratio (default);
* period-grid: mean return vs number of buying periods, one series per
  number of selling periods (default).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


class RenderError(Exception):
    """Unusable input: missing columns, no plottable rows, bad kind."""


KIND_DEFAULTS = {
    # kind -> (x column, default group-by column)
    "order-size": ("n_mf", "ratio"),
    "period-grid": ("d_buy", "d_sell"),
}


@dataclass(frozen=True)
class FigureSpec:
    input_csv: str
    figure_kind: str
    output_image: str
    group_by: Optional[str] = None
    value_column: str = "r_mf"

    def __post_init__(self):
        if self.figure_kind not in KIND_DEFAULTS:
            raise RenderError(f"unknown figure kind {self.figure_kind!r}")

    @property
    def x_column(self) -> str:
        return KIND_DEFAULTS[self.figure_kind][0]

    @property
    def group_column(self) -> str:
        return self.group_by or KIND_DEFAULTS[self.figure_kind][1]


@dataclass
class Series:
    group_value: str
    x: list = field(default_factory=list)
    mean: list = field(default_factory=list)
    std: list = field(default_factory=list)
    count: list = field(default_factory=list)


def load_rows(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def aggregate(spec: FigureSpec) -> list[Series]:
    """Group ok-status rows by (group, x) and reduce to mean/std/count."""
    rows = load_rows(spec.input_csv)
    if not rows:
        raise RenderError(f"{spec.input_csv}: no data rows")
    header = rows[0].keys()
    for column in (spec.x_column, spec.group_column, spec.value_column, "status"):
        if column not in header:
            raise RenderError(f"{spec.input_csv}: missing column {column!r}")

    buckets: dict[str, dict[float, list[float]]] = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        group = row[spec.group_column]
        x = float(row[spec.x_column])
        buckets.setdefault(group, {}).setdefault(x, []).append(
            float(row[spec.value_column]))
    if not buckets:
        raise RenderError(f"{spec.input_csv}: no ok-status rows to plot")

    series = []
    for group in sorted(buckets, key=_group_sort_key):
        s = Series(group_value=group)
        for x in sorted(buckets[group]):
            values = np.asarray(buckets[group][x])
            s.x.append(x)
            s.mean.append(float(values.mean()))
            s.std.append(float(values.std(ddof=1)) if len(values) > 1 else 0.0)
            s.count.append(len(values))
        series.append(s)
    return series


def _group_sort_key(value: str):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


AXIS_LABELS = {
    "order-size": ("order size of the dominant fund", "mean rate of return"),
    "period-grid": ("number of buying periods", "mean rate of return"),
}


def render(spec: FigureSpec) -> list[Series]:
    """Render the figure to spec.output_image; returns the aggregates."""
    series = aggregate(spec)
    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    for s in series:
        x = np.asarray(s.x)
        mean = np.asarray(s.mean)
        line, = ax.plot(x, mean, marker="o", markersize=3.5,
                        label=f"{spec.group_column} = {s.group_value}")
        if any(c > 1 for c in s.count):
            std = np.asarray(s.std)
            ax.fill_between(x, mean - std, mean + std,
                            color=line.get_color(), alpha=0.15, linewidth=0)
    if spec.figure_kind == "order-size":
        ax.set_xscale("log")
    xlabel, ylabel = AXIS_LABELS[spec.figure_kind]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.axhline(0.0, color="gray", linewidth=0.6, zorder=0)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.output_image, dpi=150)
    plt.close(fig)
    return series

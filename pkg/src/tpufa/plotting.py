"""Figure rendering for sweep reports.

Sweep commands drop a PNG next to the CSV: error probability (averaged over
weight seeds) against one coordinate, one line per value of a second
coordinate.  Rendering is headless and carries no timestamps.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .sweeps import SweepResultRow

_AXIS_NAMES = {
    "bit": "stuck-at bit position",
    "layers": "network layers",
    "row": "faulty MAC row",
    "stuck": "stuck-at type",
    "seed": "weight seed",
}


def render_sweep_figure(
    rows: Sequence[SweepResultRow],
    x_field: str,
    series_field: str,
    path: str | Path,
    title: str | None = None,
) -> Path:
    """Plot mean error probability over seeds, grouped by the series field."""
    grouped: dict[tuple, dict[int, list[float]]] = {}
    for row in rows:
        series = getattr(row.point, series_field)
        x = getattr(row.point, x_field)
        grouped.setdefault((series,), {}).setdefault(x, []).append(float(row.p_error))

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (series,) in sorted(grouped):
        points = grouped[(series,)]
        xs = sorted(points)
        ys = [sum(points[x]) / len(points[x]) for x in xs]
        ax.plot(xs, ys, marker="o", label=f"{series_field}={series}")
    ax.set_xlabel(_AXIS_NAMES.get(x_field, x_field))
    ax.set_ylabel("error probability")
    ax.set_ylim(bottom=0)
    if title:
        ax.set_title(title)
    if grouped:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path

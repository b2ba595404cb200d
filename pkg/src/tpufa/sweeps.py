"""Experiment sweeps over fault coordinates, with deterministic CSV output.

Every sweep point is an independent exact analysis; points may be evaluated
by a process pool, and rows are merged in sorted coordinate order so the CSV
is byte-identical for any worker count.  Wall-clock timing is deliberately
kept out of the rows (it would break reproducibility); runners log it to
stderr instead.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fixedpoint import StuckSpec
from .network import NetworkConfig, load_weight_matrix
from .faultmodel import FaultDescriptor, FaultSite, site_register_width
from .dtmc import InputDistribution, probability_of_error
from .weights import generate_weights

CSV_SCHEMA = "# tpufa sweep csv v1"
CSV_COLUMNS = (
    "site", "stuck", "bit", "layers", "row", "col", "seed",
    "p_error", "p_error_decimal", "error_count", "total_count",
    "states", "transitions",
)
DEFAULT_SEEDS = tuple(range(10))


@dataclass(frozen=True)
class SweepPoint:
    """One coordinate of a sweep: a fully specified fault plus a weight seed."""

    site: FaultSite
    stuck: int
    bit: int
    layers: int
    row: int
    col: int
    seed: int

    def sort_key(self) -> tuple:
        return (self.site.value, self.stuck, self.bit, self.layers, self.row, self.col, self.seed)


@dataclass(frozen=True)
class SweepResultRow:
    point: SweepPoint
    p_error: Fraction
    error_count: int
    total_count: int
    state_count: int
    transition_count: int


def _evaluate_point(payload: tuple) -> SweepResultRow:
    point, network, weights_file, dist_file = payload
    cfg = replace(network, layers=point.layers)
    if weights_file is not None:
        weights = load_weight_matrix(weights_file, cfg)
    else:
        weights = generate_weights(point.seed, cfg.neurons, cfg.widths)
    dist = None
    if dist_file is not None:
        dist = InputDistribution.from_file(dist_file, cfg.neurons, cfg.widths.activation_values)
    fault = FaultDescriptor(point.site, StuckSpec(point.bit, point.stuck), point.row, point.col)
    result = probability_of_error(cfg, weights, fault, dist)
    return SweepResultRow(
        point=point,
        p_error=result.p_error,
        error_count=result.error_count,
        total_count=result.total_count,
        state_count=result.state_count,
        transition_count=result.transition_count,
    )


def run_sweep(
    points: Sequence[SweepPoint],
    network: NetworkConfig,
    weights_file: str | Path | None = None,
    dist_file: str | Path | None = None,
    workers: int = 1,
) -> list[SweepResultRow]:
    """Evaluate all points and return rows sorted by coordinates."""
    payloads = [
        (p, network, str(weights_file) if weights_file else None, str(dist_file) if dist_file else None)
        for p in points
    ]
    if workers <= 1 or len(points) <= 1:
        rows = [_evaluate_point(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_point, payloads))
    rows.sort(key=lambda r: r.point.sort_key())
    return rows


def bit_position_points(
    network: NetworkConfig,
    site: FaultSite = FaultSite.WEIGHT_REGISTER,
    bits: Iterable[int] | None = None,
    layer_counts: Iterable[int] | None = None,
    stuck_values: Iterable[int] = (0, 1),
    seeds: Iterable[int] = DEFAULT_SEEDS,
    row: int = 1,
    col: int = 1,
) -> list[SweepPoint]:
    """Sweep grid over stuck type, bit position, layer count and seed."""
    if site is not FaultSite.WEIGHT_REGISTER:
        raise ValueError("bit-position sweeps target the weight register")
    width = site_register_width(site, network.widths)
    bit_set = tuple(bits) if bits is not None else tuple(range(width))
    layer_set = tuple(layer_counts) if layer_counts is not None else (network.layers,)
    _check_bits(bit_set, site, network)
    return [
        SweepPoint(site, st, sp, layers, row, col, seed)
        for st in sorted(set(stuck_values))
        for sp in bit_set
        for layers in layer_set
        for seed in seeds
    ]


def mac_row_points(
    network: NetworkConfig,
    site: FaultSite,
    rows: Iterable[int] | None = None,
    bits: Iterable[int] | None = None,
    stuck_values: Iterable[int] = (1,),
    seeds: Iterable[int] = DEFAULT_SEEDS,
    col: int = 1,
) -> list[SweepPoint]:
    """Sweep grid over faulty MAC rows and bit positions for one column."""
    if site is FaultSite.WEIGHT_REGISTER:
        raise ValueError("row sweeps target the multiplier or accumulator")
    width = site_register_width(site, network.widths)
    bit_set = tuple(bits) if bits is not None else tuple(range(width))
    row_set = tuple(rows) if rows is not None else tuple(range(1, network.rows + 1))
    _check_bits(bit_set, site, network)
    for r in row_set:
        if not 1 <= r <= network.rows:
            raise ValueError(f"swept row {r} outside array rows 1..{network.rows}")
    return [
        SweepPoint(site, st, sp, network.layers, r, col, seed)
        for st in sorted(set(stuck_values))
        for sp in bit_set
        for r in row_set
        for seed in seeds
    ]


def _check_bits(bit_set: tuple[int, ...], site: FaultSite, network: NetworkConfig) -> None:
    width = site_register_width(site, network.widths)
    for sp in bit_set:
        if not 0 <= sp < width:
            raise ValueError(f"bit {sp} out of range for the {width}-bit {site.value} register")


def format_csv(rows: Sequence[SweepResultRow]) -> str:
    out = io.StringIO()
    out.write(CSV_SCHEMA + "\n")
    out.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        p = row.point
        out.write(
            f"{p.site.value},{p.stuck},{p.bit},{p.layers},{p.row},{p.col},{p.seed},"
            f"{row.p_error},{float(row.p_error):.6f},{row.error_count},{row.total_count},"
            f"{row.state_count},{row.transition_count}\n"
        )
    return out.getvalue()


def write_csv(rows: Sequence[SweepResultRow], path: str | Path) -> Path:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(rows), encoding="utf-8")
    return path

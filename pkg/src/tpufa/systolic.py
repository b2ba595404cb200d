"""Cycle-accurate weight-stationary array simulator with bit-level fault injection.

Schedule (normative for this artifact, identical for every column in
column-local time): a layer takes 2N+1 cycles.  The MAC handling neuron row
rr receives its activation at cycle rr, multiplies it by the stationary
weight, adds the partial sum that arrived from the row above on the previous
cycle, and emits the result downward.  Emissions hop one row per cycle; the
bottom accumulator of each column adds up everything the bottom row emits
during cycles 1..2N.  Idle MACs emit zero, so a stuck-at-1 multiplier or
accumulator bit makes them emit the bit mask instead - the leaking effect -
and a MAC at inverse row r_inv has exactly 2N - r_inv + 1 emissions that
land inside the accumulation window.

All registers wrap at their configured widths every cycle.  Faults force the
targeted register bit on every cycle, including idle ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fixedpoint import Word, force_bit
from .network import ActivationVector, NetworkConfig, _activation_step, _check_activations, activation_batch
from .faultmodel import FaultDescriptor, FaultSite, validate_fault


@dataclass
class MacState:
    """Registers of one MAC cell (weight stays loaded, the others update per cycle)."""

    weight: Word
    product_reg: Word
    acc_reg: Word
    active: bool = False


@dataclass(frozen=True)
class TraceRow:
    cycle: int
    row: int
    col: int
    emitted: int
    leak: bool


@dataclass
class Trace:
    """Per-cycle record of every MAC emission and the bottom accumulators."""

    neurons: int
    rows: int
    cols: int
    mac_rows: list[TraceRow] = field(default_factory=list)
    bottom_acc: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def cycle_count(self) -> int:
        return len(self.bottom_acc)

    def leak_count(self) -> int:
        return sum(1 for row in self.mac_rows if row.leak)


def _stationary_weights(weights: np.ndarray, fault: FaultDescriptor | None, cfg: NetworkConfig) -> np.ndarray:
    """Physical weight grid: matrix entries inside the effective area, zero elsewhere."""
    n = cfg.neurons
    grid = np.zeros((cfg.rows, cfg.cols), dtype=np.int64)
    grid[cfg.rows - n :, :n] = weights
    if fault is not None and fault.site is FaultSite.WEIGHT_REGISTER:
        r, c = fault.row - 1, fault.col - 1
        grid[r, c] = force_bit(int(grid[r, c]), fault.stuck.bit, fault.stuck.stuck)
    return grid


def simulate_layer(
    acts: Sequence[int],
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    cfg: NetworkConfig,
) -> tuple[ActivationVector, Trace]:
    """Run one layer through the array, returning activations and the full trace."""
    _check_activations(acts, cfg)
    if fault is not None:
        validate_fault(fault, cfg)
    w = cfg.widths
    n, rows, cols = cfg.neurons, cfg.rows, cfg.cols
    mmask = (1 << w.multiplier_bits) - 1
    amask = (1 << w.accumulator_bits) - 1
    cycles = 2 * n + 1
    window = 2 * n

    grid_w = _stationary_weights(weights, fault, cfg)
    macs = [
        [MacState(Word(int(grid_w[r, c]), w.weight_bits), Word(0, w.multiplier_bits), Word(0, w.accumulator_bits)) for c in range(cols)]
        for r in range(rows)
    ]
    trace = Trace(neurons=n, rows=rows, cols=cols)
    prev_emit = [[0] * cols for _ in range(rows)]
    bottom = [0] * cols

    leak_site = fault is not None and fault.site in (FaultSite.MULTIPLIER, FaultSite.ACCUMULATOR)
    fault_r_inv = rows - fault.row + 1 if fault is not None else 0

    for t in range(1, cycles + 1):
        new_emit = [[0] * cols for _ in range(rows)]
        for r in range(1, rows + 1):
            r_inv = rows - r + 1
            rr = n + 1 - r_inv
            row_active = 1 <= rr <= n and t == rr
            for c in range(1, cols + 1):
                mac = macs[r - 1][c - 1]
                is_faulty = fault is not None and fault.row == r and fault.col == c
                active = row_active and c <= n
                x_in = acts[rr - 1] if active else 0
                product = (x_in * mac.weight.value) & mmask
                if is_faulty and fault.site is FaultSite.MULTIPLIER:
                    product = force_bit(product, fault.stuck.bit, fault.stuck.stuck)
                psum_in = prev_emit[r - 2][c - 1] if r > 1 else 0
                emitted = (psum_in + product) & amask
                if is_faulty and fault.site is FaultSite.ACCUMULATOR:
                    emitted = force_bit(emitted, fault.stuck.bit, fault.stuck.stuck)
                mac.product_reg = Word(product, w.multiplier_bits)
                mac.acc_reg = Word(emitted, w.accumulator_bits)
                mac.active = active
                new_emit[r - 1][c - 1] = emitted
                # An idle emission of the faulty MAC leaks iff it is stuck-at-1
                # and scheduled to reach the bottom accumulator in-window.
                leak = (
                    is_faulty
                    and leak_site
                    and fault.stuck.stuck == 1
                    and not active
                    and t <= 2 * n - fault_r_inv + 1
                )
                trace.mac_rows.append(TraceRow(t, r, c, emitted, leak))
        if t <= window:
            for c in range(cols):
                bottom[c] = (bottom[c] + new_emit[rows - 1][c]) & amask
        trace.bottom_acc.append(tuple(bottom))
        prev_emit = new_emit

    outputs = tuple(_activation_step(bottom[m], cfg) for m in range(n))
    return outputs, trace


def simulate_network(
    acts: Sequence[int],
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    cfg: NetworkConfig,
) -> ActivationVector:
    """All layers through the array; the fault persists across layers."""
    out, _ = simulate_network_traced(acts, weights, fault, cfg)
    return out


def simulate_network_traced(
    acts: Sequence[int],
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    cfg: NetworkConfig,
) -> tuple[ActivationVector, list[Trace]]:
    out = tuple(acts)
    traces = []
    for _ in range(cfg.layers):
        out, trace = simulate_layer(out, weights, fault, cfg)
        traces.append(trace)
    return out, traces


def render_trace(trace: Trace) -> str:
    """Deterministic cycle-by-cycle table (rows ordered by cycle, row, column)."""
    lines = [f"cycles={trace.cycle_count} rows={trace.rows} cols={trace.cols} neurons={trace.neurons}"]
    lines.append("cycle row col emitted leak")
    by_cycle: dict[int, list[TraceRow]] = {}
    for row in trace.mac_rows:
        by_cycle.setdefault(row.cycle, []).append(row)
    for t in range(1, trace.cycle_count + 1):
        for row in sorted(by_cycle.get(t, []), key=lambda x: (x.row, x.col)):
            tag = "*" if row.leak else "."
            lines.append(f"{row.cycle:5d} {row.row:3d} {row.col:3d} {row.emitted:7d}    {tag}")
        accs = " ".join(str(v) for v in trace.bottom_acc[t - 1])
        lines.append(f"{t:5d} acc [{accs}]")
    return "\n".join(lines) + "\n"


def simulate_layer_batch(
    acts: np.ndarray,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    cfg: NetworkConfig,
) -> np.ndarray:
    """simulate_layer over a (batch, N) activation array (no trace).

    Identical cycle-by-cycle state machine with every MAC register carried as
    a batch vector.
    """
    if fault is not None:
        validate_fault(fault, cfg)
    w = cfg.widths
    n, rows, cols = cfg.neurons, cfg.rows, cfg.cols
    mmask = (1 << w.multiplier_bits) - 1
    amask = (1 << w.accumulator_bits) - 1
    batch = acts.shape[0]
    cycles = 2 * n + 1
    window = 2 * n

    grid_w = _stationary_weights(weights, fault, cfg)
    fr = fault.row - 1 if fault is not None else -1
    fc = fault.col - 1 if fault is not None else -1

    prev_emit = np.zeros((batch, rows, cols), dtype=np.int64)
    bottom = np.zeros((batch, cols), dtype=np.int64)

    for t in range(1, cycles + 1):
        new_emit = np.zeros_like(prev_emit)
        new_emit[:, 1:, :] = prev_emit[:, :-1, :]
        if 1 <= t <= n:
            r_active = rows - n + t - 1
            prod = (acts[:, t - 1 : t] * grid_w[None, r_active, :]) & mmask
            if fault is not None and fault.site is FaultSite.MULTIPLIER and fr == r_active:
                prod[:, fc] = force_bit(prod[:, fc], fault.stuck.bit, fault.stuck.stuck)
            new_emit[:, r_active, :] = (new_emit[:, r_active, :] + prod) & amask
        if fault is not None and fault.site is FaultSite.MULTIPLIER and not (1 <= t <= n and fr == rows - n + t - 1):
            # Idle cycle at the faulty multiplier: the forced product register
            # still feeds the adder.
            leaked = force_bit(0, fault.stuck.bit, fault.stuck.stuck)
            new_emit[:, fr, fc] = (new_emit[:, fr, fc] + leaked) & amask
        if fault is not None and fault.site is FaultSite.ACCUMULATOR:
            new_emit[:, fr, fc] = force_bit(new_emit[:, fr, fc], fault.stuck.bit, fault.stuck.stuck)
        if t <= window:
            bottom = (bottom + new_emit[:, rows - 1, :]) & amask
        prev_emit = new_emit

    return activation_batch(bottom[:, :n], cfg)


def simulate_network_batch(
    acts: np.ndarray,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    cfg: NetworkConfig,
) -> np.ndarray:
    out = acts
    for _ in range(cfg.layers):
        out = simulate_layer_batch(out, weights, fault, cfg)
    return out

"""Fault-free forward pass of the fully connected network mapped onto the array.

Every layer reuses the same N x N weight matrix.  Column m of the array hosts
output neuron m: its accumulator collects sum_a x_a * w[a][m], wrapping at the
accumulator width after every partial sum, then ReLU and quantization produce
the next layer's activation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fixedpoint import BitWidths, QuantizationStrategy, Word, quantize, relu

ActivationVector = tuple[int, ...]


@dataclass(frozen=True)
class NetworkConfig:
    """Array geometry, layer count and datapath parameters for one analysis."""

    rows: int = 4
    cols: int = 4
    layers: int = 1
    neurons: int = 4
    widths: BitWidths = field(default_factory=BitWidths)
    quantization: QuantizationStrategy = QuantizationStrategy.KEEP_HIGH
    signed_mode: bool = False

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array must have positive dimensions, got {self.rows}x{self.cols}")
        if not 1 <= self.neurons <= min(self.rows, self.cols):
            raise ValueError(
                f"neuron count {self.neurons} must satisfy 1 <= N <= min(rows, cols) = "
                f"{min(self.rows, self.cols)}"
            )
        if self.layers < 1:
            raise ValueError(f"layer count must be >= 1, got {self.layers}")


def validate_weight_matrix(weights: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    """Check shape and weight range; returns the matrix as int64."""
    w = np.asarray(weights, dtype=np.int64)
    n = cfg.neurons
    if w.shape != (n, n):
        raise ValueError(f"weight matrix must be {n}x{n}, got shape {w.shape}")
    limit = 1 << cfg.widths.weight_bits
    if w.min(initial=0) < 0 or w.max(initial=0) >= limit:
        bad = w[(w < 0) | (w >= limit)].flat[0]
        raise ValueError(f"weight {bad} out of range for {cfg.widths.weight_bits}-bit registers")
    return w


def load_weight_matrix(path: str | Path, cfg: NetworkConfig) -> np.ndarray:
    """Read an N x N weight matrix: N lines of N whitespace-separated integers."""
    rows = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            rows.append([int(tok) for tok in stripped.split()])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: not an integer row: {line!r}") from exc
    n = cfg.neurons
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"{path}: expected {n} rows of {n} integers")
    return validate_weight_matrix(np.array(rows, dtype=np.int64), cfg)


def save_weight_matrix(path: str | Path, weights: np.ndarray) -> None:
    """Write a weight matrix in the plain-text row-per-line format."""
    w = np.asarray(weights)
    lines = [" ".join(str(int(v)) for v in row) for row in w]
    Path(path).write_text("\n".join(lines) + "\n")


def _check_activations(acts: Sequence[int], cfg: NetworkConfig) -> None:
    if len(acts) != cfg.neurons:
        raise ValueError(f"activation vector must have {cfg.neurons} elements, got {len(acts)}")
    limit = cfg.widths.activation_values
    for x in acts:
        if not 0 <= x < limit:
            raise ValueError(f"activation {x} out of range for {cfg.widths.activation_bits} bits")


def mac_product(x: int, w: int, widths: BitWidths) -> int:
    """Product of one activation and one weight, wrapped at the multiplier width."""
    return (x * w) & ((1 << widths.multiplier_bits) - 1)


def column_sum(acts: Sequence[int], weights: np.ndarray, column: int, widths: BitWidths) -> int:
    """Accumulated products of array column ``column`` (1-based).

    Partial sums wrap at the accumulator width after every addition, matching
    the register behaviour of the accumulation chain.  A shorter activation
    list gives the running sum through that many rows.
    """
    n = int(np.asarray(weights).shape[1])
    if not 1 <= column <= n:
        raise ValueError(f"column index {column} out of range 1..{n}")
    amask = (1 << widths.accumulator_bits) - 1
    total = 0
    for a, x in enumerate(acts):
        total = (total + mac_product(x, int(weights[a, column - 1]), widths)) & amask
    return total


def _activation_step(raw_sum: int, cfg: NetworkConfig) -> int:
    word = Word(raw_sum, cfg.widths.accumulator_bits)
    word = relu(word, signed=cfg.signed_mode)
    return quantize(word, cfg.quantization, cfg.widths.activation_bits).value


def forward_layer_reference(acts: Sequence[int], weights: np.ndarray, cfg: NetworkConfig) -> ActivationVector:
    """One fault-free layer: per column, accumulate, rectify, quantize."""
    _check_activations(acts, cfg)
    return tuple(
        _activation_step(column_sum(acts, weights, m, cfg.widths), cfg)
        for m in range(1, cfg.neurons + 1)
    )


def forward_network_reference(acts: Sequence[int], weights: np.ndarray, cfg: NetworkConfig) -> ActivationVector:
    """All ``cfg.layers`` layers composed, sharing one weight matrix."""
    out = tuple(acts)
    for _ in range(cfg.layers):
        out = forward_layer_reference(out, weights, cfg)
    return out


# Batch variants: same semantics, vectorized over a leading batch axis so the
# exhaustive enumeration of the input space stays cheap.


def activation_batch(raw_sums: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    """Vectorized ReLU + quantization over accumulator values."""
    w = cfg.widths
    sums = raw_sums
    if cfg.signed_mode:
        sign = (sums >> (w.accumulator_bits - 1)) & 1
        sums = np.where(sign == 1, 0, sums)
    mask = (1 << w.activation_bits) - 1
    if cfg.quantization is QuantizationStrategy.KEEP_HIGH:
        shift = w.accumulator_bits - w.activation_bits
        kept = sums >> shift if shift > 0 else sums
    elif cfg.quantization is QuantizationStrategy.KEEP_LOW:
        kept = sums
    else:
        kept = np.minimum(sums, mask)
    return kept & mask


def layer_reference_batch(acts: np.ndarray, weights: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    """forward_layer_reference over a (batch, N) activation array."""
    w = cfg.widths
    mmask = (1 << w.multiplier_bits) - 1
    amask = (1 << w.accumulator_bits) - 1
    products = (acts[:, :, None] * weights[None, :, :]) & mmask
    sums = products.sum(axis=1) & amask
    return activation_batch(sums, cfg)


def network_reference_batch(acts: np.ndarray, weights: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    out = acts
    for _ in range(cfg.layers):
        out = layer_reference_batch(out, weights, cfg)
    return out

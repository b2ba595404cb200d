"""Closed-form effect of a single permanent stuck-at fault on a layer output.

A fault is located at physical MAC (row r, column c) in one of three register
sites.  Only MACs in the bottom-left N x N effective area process activations;
a MAC there with inverse row number r_inv = R - r + 1 handles neuron row
rr = N + 1 - r_inv of the weight matrix.  The per-layer effect is an integer
added (modulo the accumulator width) to the faulty column's accumulated sum:

  weight register: +/- mask * x_rr when the forced bit actually flips the
  stored weight, zero when masked or outside the effective area.

  accumulator / multiplier, stuck-at-1: the forced bit also leaks out of the
  MAC on idle cycles, one emission per cycle draining down the column, so the
  column picks up (2N - r_inv + 1) * mask when the fault additionally flips
  the active-cycle value, (2N - r_inv) * mask when that flip is masked, and
  (2N - r_inv + 1) * mask for idle MACs up to 2N rows above the accumulators.

  accumulator / multiplier, stuck-at-0: idle emissions are already zero, so
  the only effect is -mask when the active-cycle value had the bit set.

Faulty activations of the previous layer feed the effect computation for
later layers; the hardware is reused, so corrupted values are what arrive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .fixedpoint import BitWidths, StuckSpec, force_bit
from .network import (
    ActivationVector,
    NetworkConfig,
    _activation_step,
    _check_activations,
    activation_batch,
    column_sum,
    mac_product,
)


class FaultSite(Enum):
    """Which MAC register holds the stuck bit."""

    WEIGHT_REGISTER = "weight"
    MULTIPLIER = "multiplier"
    ACCUMULATOR = "accumulator"

    @classmethod
    def from_name(cls, name: str) -> "FaultSite":
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown fault site {name!r} (choose from: {choices})") from None


def site_register_width(site: FaultSite, widths: BitWidths) -> int:
    if site is FaultSite.WEIGHT_REGISTER:
        return widths.weight_bits
    if site is FaultSite.MULTIPLIER:
        return widths.multiplier_bits
    return widths.accumulator_bits


@dataclass(frozen=True)
class FaultDescriptor:
    """One permanent stuck-at fault: register site, forced bit, MAC position."""

    site: FaultSite
    stuck: StuckSpec
    row: int
    col: int


@dataclass(frozen=True)
class FaultGeometry:
    """Position of the faulty MAC relative to the effective area."""

    inverse_row: int
    relative_row: int
    in_effective_area: bool
    in_upper_leak_area: bool


def validate_fault(fault: FaultDescriptor, cfg: NetworkConfig) -> None:
    if not 1 <= fault.row <= cfg.rows:
        raise ValueError(f"fault row {fault.row} outside array rows 1..{cfg.rows}")
    if not 1 <= fault.col <= cfg.cols:
        raise ValueError(f"fault column {fault.col} outside array columns 1..{cfg.cols}")
    width = site_register_width(fault.site, cfg.widths)
    if fault.stuck.bit >= width:
        raise ValueError(
            f"stuck bit {fault.stuck.bit} out of range for the {width}-bit {fault.site.value} register"
        )


def fault_geometry(fault: FaultDescriptor, cfg: NetworkConfig) -> FaultGeometry:
    n = cfg.neurons
    r_inv = cfg.rows - fault.row + 1
    rr = n + 1 - r_inv
    effective = r_inv <= n and fault.col <= n
    upper = n < r_inv <= 2 * n and fault.col <= n
    return FaultGeometry(r_inv, rr, effective, upper)


def effective_area(fault: FaultDescriptor, cfg: NetworkConfig) -> bool:
    """True iff the faulty MAC processes activations (bottom-left N x N area)."""
    validate_fault(fault, cfg)
    return fault_geometry(fault, cfg).in_effective_area


def fault_effect_weight(fault: FaultDescriptor, weights: np.ndarray, x_rr: int, cfg: NetworkConfig) -> int:
    """Signed effect of a stuck weight-register bit, given activation x_rr."""
    if fault.site is not FaultSite.WEIGHT_REGISTER:
        raise ValueError(f"fault site is {fault.site.value}, not the weight register")
    geo = fault_geometry(fault, cfg)
    if not geo.in_effective_area:
        return 0
    w = int(weights[geo.relative_row - 1, fault.col - 1])
    bit = (w >> fault.stuck.bit) & 1
    mask = fault.stuck.mask
    if fault.stuck.stuck == 1:
        return mask * x_rr if bit == 0 else 0
    return -(mask * x_rr) if bit == 1 else 0


def _leak_effect(fault: FaultDescriptor, latched: int, cfg: NetworkConfig) -> int:
    # Shared shape of the accumulator and multiplier cases; `latched` is the
    # fault-free active-cycle value whose stuck bit decides masking.
    geo = fault_geometry(fault, cfg)
    mask = fault.stuck.mask
    n = cfg.neurons
    if fault.stuck.stuck == 1:
        if geo.in_upper_leak_area:
            return (2 * n - geo.inverse_row + 1) * mask
        if geo.in_effective_area:
            bit = (latched >> fault.stuck.bit) & 1
            if bit == 0:
                return (2 * n - geo.inverse_row + 1) * mask
            return (2 * n - geo.inverse_row) * mask
        return 0
    if geo.in_effective_area and (latched >> fault.stuck.bit) & 1:
        return -mask
    return 0


def fault_effect_accumulator(fault: FaultDescriptor, partial_sum: int, cfg: NetworkConfig) -> int:
    """Signed effect of a stuck accumulator bit.

    ``partial_sum`` is the fault-free value latched by the faulty MAC on its
    active cycle (the column's running sum through its row); it is only
    consulted when the MAC lies in the effective area.
    """
    if fault.site is not FaultSite.ACCUMULATOR:
        raise ValueError(f"fault site is {fault.site.value}, not the accumulator")
    return _leak_effect(fault, partial_sum, cfg)


def fault_effect_multiplier(fault: FaultDescriptor, product: int, cfg: NetworkConfig) -> int:
    """Signed effect of a stuck multiplier-output bit.

    ``product`` is the fault-free multiplication result of the active cycle;
    the leaking behaviour is identical to the accumulator case.
    """
    if fault.site is not FaultSite.MULTIPLIER:
        raise ValueError(f"fault site is {fault.site.value}, not the multiplier")
    return _leak_effect(fault, product, cfg)


def layer_fault_effect(acts: Sequence[int], weights: np.ndarray, fault: FaultDescriptor, cfg: NetworkConfig) -> int:
    """Signed effect on the faulty column's final sum for one layer."""
    geo = fault_geometry(fault, cfg)
    if fault.site is FaultSite.WEIGHT_REGISTER:
        if not geo.in_effective_area:
            return 0
        return fault_effect_weight(fault, weights, acts[geo.relative_row - 1], cfg)
    if not (geo.in_effective_area or geo.in_upper_leak_area):
        return 0
    latched = 0
    if geo.in_effective_area:
        if fault.site is FaultSite.MULTIPLIER:
            latched = mac_product(acts[geo.relative_row - 1], int(weights[geo.relative_row - 1, fault.col - 1]), cfg.widths)
        else:
            latched = column_sum(acts[: geo.relative_row], weights, fault.col, cfg.widths)
    if fault.site is FaultSite.MULTIPLIER:
        return fault_effect_multiplier(fault, latched, cfg)
    return fault_effect_accumulator(fault, latched, cfg)


def forward_layer_faulty(acts: Sequence[int], weights: np.ndarray, fault: FaultDescriptor, cfg: NetworkConfig) -> ActivationVector:
    """One layer with the fault effect folded into the faulty column's sum."""
    _check_activations(acts, cfg)
    validate_fault(fault, cfg)
    amask = (1 << cfg.widths.accumulator_bits) - 1
    out = []
    for m in range(1, cfg.neurons + 1):
        total = column_sum(acts, weights, m, cfg.widths)
        if m == fault.col:
            total = (total + layer_fault_effect(acts, weights, fault, cfg)) & amask
        out.append(_activation_step(total, cfg))
    return tuple(out)


def forward_network_faulty(acts: Sequence[int], weights: np.ndarray, fault: FaultDescriptor, cfg: NetworkConfig) -> ActivationVector:
    """All layers with the fault active in every layer, feeding faulty activations forward."""
    out = tuple(acts)
    for _ in range(cfg.layers):
        out = forward_layer_faulty(out, weights, fault, cfg)
    return out


# Batch variants over a (batch, N) activation array.


def _leak_effect_batch(fault: FaultDescriptor, latched: np.ndarray, cfg: NetworkConfig) -> np.ndarray | int:
    geo = fault_geometry(fault, cfg)
    mask = fault.stuck.mask
    n = cfg.neurons
    if fault.stuck.stuck == 1:
        if geo.in_upper_leak_area:
            return (2 * n - geo.inverse_row + 1) * mask
        if geo.in_effective_area:
            bit = (latched >> fault.stuck.bit) & 1
            return np.where(bit == 0, (2 * n - geo.inverse_row + 1) * mask, (2 * n - geo.inverse_row) * mask)
        return 0
    if geo.in_effective_area:
        bit = (latched >> fault.stuck.bit) & 1
        return np.where(bit == 1, -mask, 0)
    return 0


def layer_faulty_batch(acts: np.ndarray, weights: np.ndarray, fault: FaultDescriptor, cfg: NetworkConfig) -> np.ndarray:
    """forward_layer_faulty over a (batch, N) activation array."""
    validate_fault(fault, cfg)
    w = cfg.widths
    mmask = (1 << w.multiplier_bits) - 1
    amask = (1 << w.accumulator_bits) - 1
    geo = fault_geometry(fault, cfg)
    products = (acts[:, :, None] * weights[None, :, :]) & mmask
    sums = products.sum(axis=1) & amask

    effect: np.ndarray | int = 0
    if fault.site is FaultSite.WEIGHT_REGISTER:
        if geo.in_effective_area:
            wv = int(weights[geo.relative_row - 1, fault.col - 1])
            bit = (wv >> fault.stuck.bit) & 1
            x_rr = acts[:, geo.relative_row - 1]
            if fault.stuck.stuck == 1 and bit == 0:
                effect = fault.stuck.mask * x_rr
            elif fault.stuck.stuck == 0 and bit == 1:
                effect = -(fault.stuck.mask * x_rr)
    elif geo.in_effective_area or geo.in_upper_leak_area:
        latched: np.ndarray | int = 0
        if geo.in_effective_area:
            if fault.site is FaultSite.MULTIPLIER:
                latched = products[:, geo.relative_row - 1, fault.col - 1]
            else:
                latched = products[:, : geo.relative_row, fault.col - 1].sum(axis=1) & amask
        effect = _leak_effect_batch(fault, latched, cfg)

    if not (isinstance(effect, int) and effect == 0):
        sums[:, fault.col - 1] = (sums[:, fault.col - 1] + effect) & amask
    return activation_batch(sums, cfg)


def network_faulty_batch(acts: np.ndarray, weights: np.ndarray, fault: FaultDescriptor, cfg: NetworkConfig) -> np.ndarray:
    out = acts
    for _ in range(cfg.layers):
        out = layer_faulty_batch(out, weights, fault, cfg)
    return out

"""Cross-engine consistency checks: the closed-form fault model against the
cycle-accurate simulator, and the enumeration evaluator against the
simulator-backed brute-force route.

These run as the ``selfcheck`` CLI command and back the acceptance suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .fixedpoint import BitWidths, QuantizationStrategy, StuckSpec
from .network import NetworkConfig
from .faultmodel import FaultDescriptor, FaultSite, site_register_width
from .dtmc import _layer_index_maps, brute_force_probability, probability_of_error
from .systolic import simulate_network_batch
from .faultmodel import network_faulty_batch

SMALL_WIDTHS = BitWidths(weight_bits=2, activation_bits=2, multiplier_bits=4, accumulator_bits=6)


def all_faults(cfg: NetworkConfig) -> Iterator[FaultDescriptor]:
    """Every site, stuck type, bit position and MAC location for a config."""
    for site in FaultSite:
        width = site_register_width(site, cfg.widths)
        for sp in range(width):
            for st in (0, 1):
                for r in range(1, cfg.rows + 1):
                    for c in range(1, cfg.cols + 1):
                        yield FaultDescriptor(site, StuckSpec(sp, st), r, c)


def exhaustive_layer_equivalence(
    cfg: NetworkConfig, weights: np.ndarray, progress: Callable[[str], None] | None = None
) -> int:
    """Closed form vs simulator over the whole input space and every fault.

    Compares the single-layer activation maps of both engines; equal maps make
    the L-fold compositions equal for every layer count.  Returns the number
    of mismatching faults.
    """
    ref_c, _ = _layer_index_maps(cfg, weights, None, use_simulator=False)
    ref_s, _ = _layer_index_maps(cfg, weights, None, use_simulator=True)
    mismatches = 0 if np.array_equal(ref_c, ref_s) else 1
    for fault in all_faults(cfg):
        _, map_c = _layer_index_maps(cfg, weights, fault, use_simulator=False)
        _, map_s = _layer_index_maps(cfg, weights, fault, use_simulator=True)
        if not np.array_equal(map_c, map_s):
            mismatches += 1
            if progress:
                progress(f"mismatch: {fault}")
    return mismatches


def sampled_network_equivalence(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor,
    samples: int,
    seed: int,
) -> int:
    """Closed form vs simulator on sampled inputs through the full network."""
    rng = np.random.default_rng(seed)
    acts = rng.integers(0, cfg.widths.activation_values, size=(samples, cfg.neurons), dtype=np.int64)
    out_c = network_faulty_batch(acts, weights, fault, cfg)
    out_s = simulate_network_batch(acts, weights, fault, cfg)
    return int((out_c != out_s).any(axis=1).sum())


@dataclass(frozen=True)
class RandomConfiguration:
    cfg: NetworkConfig
    weights: np.ndarray
    fault: FaultDescriptor


def random_configurations(count: int, seed: int) -> Iterator[RandomConfiguration]:
    """Randomized analyses spanning all sites, both stuck types, every bit
    position, every MAC of the 4x4 grid, N in 1..4 and L in 1..5.

    Every fourth configuration uses the default register widths so the wider
    multiplier/accumulator bit positions are all exercised; the rest draw
    smaller widths (keeping multiplier_bits >= weight+activation bits, the
    regime where the closed-form weight-fault arithmetic is exact).
    """
    rng = np.random.default_rng(seed)
    grid = [(r, c) for r in range(1, 5) for c in range(1, 5)]
    sites = list(FaultSite)
    for i in range(count):
        n = 1 + i % 4
        layers = 1 + (i // 4) % 5
        site = sites[i % 3]
        stuck = (i // 3) % 2
        row, col = grid[i % 16]
        if i % 4 == 0:
            widths = BitWidths()
        else:
            wb = int(rng.integers(1, 5))
            ab = int(rng.integers(1, 5))
            mb = wb + ab + int(rng.integers(0, 3))
            acc = mb + int(rng.integers(0, 4))
            widths = BitWidths(wb, ab, mb, acc)
        quant = list(QuantizationStrategy)[int(rng.integers(0, 3))]
        cfg = NetworkConfig(
            rows=4, cols=4, layers=layers, neurons=n, widths=widths,
            quantization=quant, signed_mode=bool(rng.integers(0, 2)),
        )
        width = site_register_width(site, widths)
        sp = int(rng.integers(0, width))
        weights = rng.integers(0, 1 << widths.weight_bits, size=(n, n), dtype=np.int64)
        yield RandomConfiguration(cfg, weights, FaultDescriptor(site, StuckSpec(sp, stuck), row, col))


def probability_identity(count: int, seed: int, progress: Callable[[str], None] | None = None) -> int:
    """probability_of_error vs brute_force_probability on random configurations."""
    mismatches = 0
    for i, rc in enumerate(random_configurations(count, seed)):
        closed = probability_of_error(rc.cfg, rc.weights, rc.fault).p_error
        brute = brute_force_probability(rc.cfg, rc.weights, rc.fault)
        if closed != brute:
            mismatches += 1
            if progress:
                progress(f"mismatch at configuration {i}: closed={closed} brute={brute}")
    return mismatches


def run_selfcheck(samples: int = 10_000, trials: int = 50, seed: int = 0, log: Callable[[str], None] = print) -> bool:
    """Run the three consistency suites; returns True when everything agrees."""
    ok = True
    rng = np.random.default_rng(seed)

    total_bad = 0
    for n, r in ((1, 2), (2, 2), (2, 4)):
        cfg = NetworkConfig(rows=r, cols=r, layers=1, neurons=n, widths=SMALL_WIDTHS)
        weights = rng.integers(0, 4, size=(n, n), dtype=np.int64)
        total_bad += exhaustive_layer_equivalence(cfg, weights, progress=log)
    status = "PASS" if total_bad == 0 else f"FAIL ({total_bad} faults disagree)"
    log(f"closed-form vs simulator, exhaustive small configs: {status}")
    ok &= total_bad == 0

    cfg = NetworkConfig(rows=4, cols=4, layers=3, neurons=4)
    weights = rng.integers(0, 16, size=(4, 4), dtype=np.int64)
    bad = 0
    for fault in itertools.islice(all_faults(cfg), 0, None, 7):
        bad += sampled_network_equivalence(cfg, weights, fault, samples=samples // 10, seed=seed)
    status = "PASS" if bad == 0 else f"FAIL ({bad} samples disagree)"
    log(f"closed-form vs simulator, sampled default config: {status}")
    ok &= bad == 0

    bad = probability_identity(trials, seed, progress=log)
    status = "PASS" if bad == 0 else f"FAIL ({bad} configurations disagree)"
    log(f"enumeration vs brute force on random configurations: {status}")
    ok &= bad == 0
    return bool(ok)

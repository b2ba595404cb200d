"""Text generation for the exported probabilistic-model-checker input files.

Emits a DTMC in the PRISM language: one module per neuron for the
synchronized input-selection step, one execution module whose guarded
updates encode the per-layer column sums, the closed-form fault effect,
ReLU and quantization, plus a PCTL property file querying the probability
of eventually reaching the error state.  Output is a pure function of the
configuration, so files are byte-identical across runs.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .fixedpoint import QuantizationStrategy
from .network import NetworkConfig
from .faultmodel import FaultDescriptor, FaultSite, fault_geometry

PROPERTY_TEXT = 'P=? [ F "error" ]\n'


def _relu_quant_expr(y: str, cfg: NetworkConfig) -> str:
    w = cfg.widths
    v = w.activation_values
    if cfg.signed_mode:
        y = f"(floor({y} / {1 << (w.accumulator_bits - 1)}) >= 1 ? 0 : {y})"
    if cfg.quantization is QuantizationStrategy.KEEP_HIGH:
        shift = w.accumulator_bits - w.activation_bits
        if shift > 0:
            return f"mod(floor({y} / {1 << shift}), {v})"
        return f"mod({y}, {v})"
    if cfg.quantization is QuantizationStrategy.KEEP_LOW:
        return f"mod({y}, {v})"
    return f"min({y}, {v - 1})"


def _stepwise_sum(terms: list[str], modulus: int) -> str:
    expr = "0"
    for term in terms:
        expr = f"mod({expr} + {term}, {modulus})"
    return expr


def _effect_expr(
    cfg: NetworkConfig, weights: np.ndarray, fault: FaultDescriptor
) -> tuple[str, list[str], int]:
    """(effect expression, helper formula lines, max negative magnitude)."""
    geo = fault_geometry(fault, cfg)
    n = cfg.neurons
    w = cfg.widths
    sm = fault.stuck.mask
    amod = 1 << w.accumulator_bits
    helpers: list[str] = []
    if fault.site is FaultSite.WEIGHT_REGISTER:
        if not geo.in_effective_area:
            return "0", helpers, 0
        wv = int(weights[geo.relative_row - 1, fault.col - 1])
        bit = (wv >> fault.stuck.bit) & 1
        if fault.stuck.stuck == 1 and bit == 0:
            return f"{sm} * f{geo.relative_row}", helpers, 0
        if fault.stuck.stuck == 0 and bit == 1:
            return f"-({sm} * f{geo.relative_row})", helpers, sm * (w.activation_values - 1)
        return "0", helpers, 0
    if fault.stuck.stuck == 1:
        if geo.in_upper_leak_area:
            return str((2 * n - geo.inverse_row + 1) * sm), helpers, 0
        if not geo.in_effective_area:
            return "0", helpers, 0
        if fault.site is FaultSite.ACCUMULATOR:
            terms = [f"pf_{a}_{fault.col}" for a in range(1, geo.relative_row + 1)]
            helpers.append(f"formula latched = {_stepwise_sum(terms, amod)};")
            probe = "latched"
        else:
            probe = f"pf_{geo.relative_row}_{fault.col}"
        hit = (2 * n - geo.inverse_row) * sm
        miss = (2 * n - geo.inverse_row + 1) * sm
        return f"(mod(floor({probe} / {sm}), 2) = 1 ? {hit} : {miss})", helpers, 0
    if not geo.in_effective_area:
        return "0", helpers, 0
    if fault.site is FaultSite.ACCUMULATOR:
        terms = [f"pf_{a}_{fault.col}" for a in range(1, geo.relative_row + 1)]
        helpers.append(f"formula latched = {_stepwise_sum(terms, amod)};")
        probe = "latched"
    else:
        probe = f"pf_{geo.relative_row}_{fault.col}"
    return f"(mod(floor({probe} / {sm}), 2) = 1 ? -{sm} : 0)", helpers, sm


def model_text(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    dist,
) -> str:
    w = cfg.widths
    n = cfg.neurons
    v = w.activation_values
    mmod = 1 << w.multiplier_bits
    amod = 1 << w.accumulator_bits
    lines: list[str] = []
    lines.append("// stuck-at fault propagation model (tpufa export v1)")
    lines.append(
        f"// geometry rows={cfg.rows} cols={cfg.cols} neurons={n} layers={cfg.layers}"
    )
    lines.append(
        f"// widths weight={w.weight_bits} activation={w.activation_bits} "
        f"multiplier={w.multiplier_bits} accumulator={w.accumulator_bits}"
    )
    lines.append(
        f"// quantization={cfg.quantization.value} signed={'on' if cfg.signed_mode else 'off'}"
    )
    if fault is not None:
        lines.append(
            f"// fault site={fault.site.value} stuck={fault.stuck.stuck} "
            f"bit={fault.stuck.bit} row={fault.row} col={fault.col}"
        )
    else:
        lines.append("// fault none (control model)")
    rows_txt = "; ".join(" ".join(str(int(x)) for x in row) for row in weights)
    lines.append(f"// weights [{rows_txt}]")
    lines.append("")
    lines.append("dtmc")
    lines.append("")

    # Input selection: one synchronized step assigns every neuron its value.
    for i in range(1, n + 1):
        lines.append(f"module select_{i}")
        lines.append(f"    x{i} : [0..{v - 1}] init 0;")
        if i == 1:
            lines.append("    sel : bool init false;")
        branches = []
        for z in range(v):
            p: Fraction = dist.per_neuron[i - 1][z]
            update = f"(x{i}'={z})"
            if i == 1:
                update += " & (sel'=true)"
            branches.append(f"{p.numerator}/{p.denominator} : {update}")
        lines.append(f"    [pick] !sel -> {' + '.join(branches)};")
        lines.append("endmodule")
        lines.append("")

    # Per-cycle data path expressed as formulas over the current activations.
    for a in range(1, n + 1):
        for m in range(1, n + 1):
            wv = int(weights[a - 1, m - 1])
            lines.append(f"formula pn_{a}_{m} = mod(n{a} * {wv}, {mmod});")
            lines.append(f"formula pf_{a}_{m} = mod(f{a} * {wv}, {mmod});")
    for m in range(1, n + 1):
        terms_n = [f"pn_{a}_{m}" for a in range(1, n + 1)]
        lines.append(f"formula Yn_{m} = {_stepwise_sum(terms_n, amod)};")
    effect_col = 0
    if fault is not None:
        effect, helpers, max_neg = _effect_expr(cfg, weights, fault)
        if effect != "0":
            effect_col = fault.col
            lines.extend(helpers)
            lift = amod * (max_neg // amod + 1) if max_neg else 0
            lines.append(f"formula effect = {effect};")
    for m in range(1, n + 1):
        terms_f = [f"pf_{a}_{m}" for a in range(1, n + 1)]
        base = _stepwise_sum(terms_f, amod)
        if m == effect_col:
            lines.append(f"formula Yf_{m} = mod({base} + effect + {lift}, {amod});")
        else:
            lines.append(f"formula Yf_{m} = {base};")
    for m in range(1, n + 1):
        lines.append(f"formula act_n_{m} = {_relu_quant_expr(f'Yn_{m}', cfg)};")
        lines.append(f"formula act_f_{m} = {_relu_quant_expr(f'Yf_{m}', cfg)};")
    lines.append("")

    eq = " & ".join(f"n{m}=f{m}" for m in range(1, n + 1))
    copy_updates = " & ".join(f"(n{m}'=x{m}) & (f{m}'=x{m})" for m in range(1, n + 1))
    step_updates = " & ".join(f"(n{m}'=act_n_{m}) & (f{m}'=act_f_{m})" for m in range(1, n + 1))
    lines.append("module execution")
    lines.append("    ph : [0..4] init 0;")
    lines.append(f"    layer : [0..{cfg.layers}] init 0;")
    for m in range(1, n + 1):
        lines.append(f"    n{m} : [0..{v - 1}] init 0;")
        lines.append(f"    f{m} : [0..{v - 1}] init 0;")
    lines.append(f"    [load] sel & ph=0 -> (ph'=1) & {copy_updates};")
    lines.append(f"    [sa] ph=1 & layer<{cfg.layers} -> (ph'=2);")
    lines.append(f"    [afq] ph=2 -> (ph'=1) & (layer'=layer+1) & {step_updates};")
    lines.append(f"    [no_err] ph=1 & layer={cfg.layers} & ({eq}) -> (ph'=3);")
    lines.append(f"    [err] ph=1 & layer={cfg.layers} & !({eq}) -> (ph'=4);")
    lines.append("    [halt] ph>=3 -> true;")
    lines.append("endmodule")
    lines.append("")
    lines.append('label "begin" = ph=0;')
    lines.append('label "ready" = ph=1;')
    lines.append('label "calculating" = ph=2;')
    lines.append('label "end" = ph>=3;')
    lines.append('label "error" = ph=4;')
    lines.append('label "not_selected" = !sel;')
    lines.append('label "selected" = sel;')
    return "\n".join(lines) + "\n"

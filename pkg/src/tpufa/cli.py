"""Command-line interface.

Subcommands: analyze, sweep-bits, sweep-layers, sweep-row, export-model,
simulate-trace, selfcheck.  Flags mirror the configuration-file keys and
override them.  Sweep commands write a CSV plus a rendered figure next to it.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .fixedpoint import BitWidths, QuantizationStrategy, StuckSpec
from .network import NetworkConfig, load_weight_matrix
from .faultmodel import FaultDescriptor, FaultSite, validate_fault
from .dtmc import (
    InputDistribution,
    export_model_checker_format,
    first_diverging_input,
    probability_of_error,
)
from .systolic import render_trace, simulate_network_traced
from .config import ConfigError, ExperimentConfig, load_config, parse_config, parse_int_set
from .sweeps import (
    DEFAULT_SEEDS,
    bit_position_points,
    mac_row_points,
    run_sweep,
    write_csv,
)
from .weights import generate_weights
from . import selfcheck


def _add_common_args(p: argparse.ArgumentParser, fault: bool = True) -> None:
    p.add_argument("--config", type=Path, help="configuration file (flat key = value sections)")
    net = p.add_argument_group("network overrides")
    net.add_argument("--rows", type=int)
    net.add_argument("--cols", type=int)
    net.add_argument("--layers", type=int)
    net.add_argument("--neurons", type=int)
    net.add_argument("--weight-bits", type=int)
    net.add_argument("--activation-bits", type=int)
    net.add_argument("--multiplier-bits", type=int)
    net.add_argument("--accumulator-bits", type=int)
    net.add_argument("--quantization", choices=[s.value for s in QuantizationStrategy])
    net.add_argument("--signed", action=argparse.BooleanOptionalAction, default=None)
    if fault:
        flt = p.add_argument_group("fault overrides")
        flt.add_argument("--site", choices=[s.value for s in FaultSite])
        flt.add_argument("--stuck", type=int, choices=[0, 1])
        flt.add_argument("--bit", type=int)
        flt.add_argument("--row", type=int)
        flt.add_argument("--col", type=int)
    data = p.add_argument_group("data")
    data.add_argument("--weights-file", type=Path)
    data.add_argument("--seed", type=int, help="weight-generation seed (default 0)")
    data.add_argument("--dist-file", type=Path, help="per-neuron input distribution file")


def _add_sweep_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", type=Path, help="CSV output path")
    p.add_argument("--bits", type=parse_int_set, help="bit positions, e.g. 0..3 or 0,2")
    p.add_argument("--layer-counts", type=parse_int_set, help="layer counts, e.g. 1..5")
    p.add_argument("--stuck-values", type=parse_int_set, help="stuck types, e.g. 0,1")
    p.add_argument("--seeds", type=parse_int_set, help="weight seeds, e.g. 0..9")
    p.add_argument("--workers", type=int, default=1, help="parallel workers (rows stay sorted)")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG next to the CSV")


def _build_experiment(args: argparse.Namespace) -> ExperimentConfig:
    exp = load_config(args.config) if args.config else parse_config("")
    widths = exp.network.widths
    width_updates = {
        name: getattr(args, name)
        for name in ("weight_bits", "activation_bits", "multiplier_bits", "accumulator_bits")
        if getattr(args, name, None) is not None
    }
    if width_updates:
        widths = replace(widths, **width_updates)
    net_updates = {
        name: getattr(args, name)
        for name in ("rows", "cols", "layers", "neurons")
        if getattr(args, name, None) is not None
    }
    if getattr(args, "quantization", None) is not None:
        net_updates["quantization"] = QuantizationStrategy.from_name(args.quantization)
    if getattr(args, "signed", None) is not None:
        net_updates["signed_mode"] = args.signed
    network = replace(exp.network, widths=widths, **net_updates)

    fault = exp.fault
    fault_flags = {name: getattr(args, name, None) for name in ("site", "stuck", "bit", "row", "col")}
    if any(v is not None for v in fault_flags.values()):
        if fault is None and fault_flags["site"] is None:
            raise ConfigError("fault overrides need --site (or a [fault] section)")
        site = FaultSite.from_name(fault_flags["site"]) if fault_flags["site"] else fault.site
        stuck = fault_flags["stuck"] if fault_flags["stuck"] is not None else (fault.stuck.stuck if fault else 1)
        bit = fault_flags["bit"] if fault_flags["bit"] is not None else (fault.stuck.bit if fault else 0)
        row = fault_flags["row"] if fault_flags["row"] is not None else (fault.row if fault else 1)
        col = fault_flags["col"] if fault_flags["col"] is not None else (fault.col if fault else 1)
        fault = FaultDescriptor(site, StuckSpec(bit, stuck), row, col)
    if fault is not None:
        validate_fault(fault, network)

    return replace(
        exp,
        network=network,
        fault=fault,
        weights_file=args.weights_file if getattr(args, "weights_file", None) else exp.weights_file,
        weights_seed=args.seed if getattr(args, "seed", None) is not None else exp.weights_seed,
        distribution_file=args.dist_file if getattr(args, "dist_file", None) else exp.distribution_file,
    )


def _load_weights(exp: ExperimentConfig) -> np.ndarray:
    if exp.weights_file is not None:
        return load_weight_matrix(exp.weights_file, exp.network)
    return generate_weights(exp.weights_seed, exp.network.neurons, exp.network.widths)


def _load_dist(exp: ExperimentConfig) -> InputDistribution | None:
    if exp.distribution_file is None:
        return None
    return InputDistribution.from_file(
        exp.distribution_file, exp.network.neurons, exp.network.widths.activation_values
    )


def _describe(exp: ExperimentConfig) -> list[str]:
    net = exp.network
    w = net.widths
    lines = [
        f"network: rows={net.rows} cols={net.cols} neurons={net.neurons} layers={net.layers}",
        f"widths: weight={w.weight_bits} activation={w.activation_bits} "
        f"multiplier={w.multiplier_bits} accumulator={w.accumulator_bits}",
        f"quantization: {net.quantization.value}  signed: {'on' if net.signed_mode else 'off'}",
    ]
    if exp.fault is not None:
        f = exp.fault
        lines.append(
            f"fault: site={f.site.value} stuck={f.stuck.stuck} bit={f.stuck.bit} row={f.row} col={f.col}"
        )
    else:
        lines.append("fault: none (control)")
    if exp.weights_file is not None:
        lines.append(f"weights: file {exp.weights_file}")
    else:
        lines.append(f"weights: seed {exp.weights_seed}")
    return lines


def _cmd_analyze(args: argparse.Namespace) -> int:
    exp = _build_experiment(args)
    weights = _load_weights(exp)
    dist = _load_dist(exp)
    started = time.perf_counter()
    result = probability_of_error(exp.network, weights, exp.fault, dist)
    elapsed = time.perf_counter() - started
    lines = _describe(exp)
    lines.append(f"model: {result.state_count} states, {result.transition_count} transitions")
    lines.append(f"p_error: {result.p_error} ({float(result.p_error):.6f})")
    lines.append(f"errors: {result.error_count} of {result.total_count} input vectors")
    if result.first_divergence:
        hist = ", ".join(f"layer {l}: {c}" for l, c in sorted(result.first_divergence.items()))
    else:
        hist = "none"
    lines.append(f"first divergence: {hist}")
    lines.append(f"verification time: {elapsed:.3f}s")
    report = "\n".join(lines) + "\n"
    print(report, end="")
    if args.show_trace and exp.fault is not None:
        diverging = first_diverging_input(exp.network, weights, exp.fault)
        if diverging is None:
            print("no diverging input exists; nothing to trace")
        else:
            print(f"trace of diverging input {','.join(map(str, diverging))}:")
            _, traces = simulate_network_traced(diverging, weights, exp.fault, exp.network)
            for k, trace in enumerate(traces, start=1):
                print(f"layer {k}")
                print(render_trace(trace), end="")
    if args.output or exp.output:
        path = Path(args.output or exp.output)
        path.write_text(report, encoding="utf-8")
    return 0


def _sweep_defaults(args: argparse.Namespace, exp: ExperimentConfig):
    sweep = exp.sweep
    bits = args.bits if args.bits is not None else sweep.bits
    layer_counts = args.layer_counts if args.layer_counts is not None else sweep.layers
    stuck_values = args.stuck_values if args.stuck_values is not None else sweep.stuck
    seeds = args.seeds if args.seeds is not None else (sweep.seeds or DEFAULT_SEEDS)
    return bits, layer_counts, stuck_values, seeds


def _run_sweep_command(args, exp, points, x_field: str, series_field: str) -> int:
    output = args.output or exp.output
    if output is None:
        raise ConfigError("sweeps need an --output CSV path (or [output] path in the config)")
    started = time.perf_counter()
    rows = run_sweep(
        points,
        exp.network,
        weights_file=exp.weights_file,
        dist_file=exp.distribution_file,
        workers=args.workers,
    )
    elapsed = time.perf_counter() - started
    path = write_csv(rows, output)
    print(f"{len(rows)} rows in {elapsed:.2f}s -> {path}", file=sys.stderr)
    if not args.no_plot and rows:
        from .plotting import render_sweep_figure

        figure = render_sweep_figure(rows, x_field, series_field, Path(output).with_suffix(".png"))
        print(f"figure -> {figure}", file=sys.stderr)
    return 0


def _cmd_sweep_bits(args: argparse.Namespace) -> int:
    exp = _build_experiment(args)
    bits, layer_counts, stuck_values, seeds = _sweep_defaults(args, exp)
    fault = exp.fault
    points = bit_position_points(
        exp.network,
        site=fault.site if fault else FaultSite.WEIGHT_REGISTER,
        bits=bits,
        layer_counts=layer_counts,
        stuck_values=stuck_values if stuck_values is not None else (0, 1),
        seeds=seeds,
        row=fault.row if fault else 1,
        col=fault.col if fault else 1,
    )
    return _run_sweep_command(args, exp, points, x_field="bit", series_field="layers")


def _cmd_sweep_layers(args: argparse.Namespace) -> int:
    exp = _build_experiment(args)
    bits, layer_counts, stuck_values, seeds = _sweep_defaults(args, exp)
    if layer_counts is None:
        layer_counts = tuple(range(1, 6))
    fault = exp.fault
    points = bit_position_points(
        exp.network,
        site=fault.site if fault else FaultSite.WEIGHT_REGISTER,
        bits=bits,
        layer_counts=layer_counts,
        stuck_values=stuck_values if stuck_values is not None else (0, 1),
        seeds=seeds,
        row=fault.row if fault else 1,
        col=fault.col if fault else 1,
    )
    return _run_sweep_command(args, exp, points, x_field="layers", series_field="bit")


def _cmd_sweep_row(args: argparse.Namespace) -> int:
    exp = _build_experiment(args)
    bits, _, stuck_values, seeds = _sweep_defaults(args, exp)
    rows_swept = args.rows_swept if args.rows_swept is not None else exp.sweep.rows
    fault = exp.fault
    site = fault.site if fault else FaultSite.ACCUMULATOR
    points = mac_row_points(
        exp.network,
        site=site,
        rows=rows_swept,
        bits=bits,
        stuck_values=stuck_values if stuck_values is not None else (1,),
        seeds=seeds,
        col=fault.col if fault else 1,
    )
    return _run_sweep_command(args, exp, points, x_field="row", series_field="bit")


def _cmd_export_model(args: argparse.Namespace) -> int:
    exp = _build_experiment(args)
    weights = _load_weights(exp)
    dist = _load_dist(exp)
    model_path, property_path = export_model_checker_format(
        exp.network, weights, exp.fault, dist, args.output_dir
    )
    print(f"model -> {model_path}")
    print(f"property -> {property_path}")
    return 0


def _cmd_simulate_trace(args: argparse.Namespace) -> int:
    exp = _build_experiment(args)
    weights = _load_weights(exp)
    try:
        acts = tuple(int(tok) for tok in args.input.split(","))
    except ValueError:
        raise ConfigError(f"--input must be comma-separated integers, got {args.input!r}") from None
    outputs, traces = simulate_network_traced(acts, weights, exp.fault, exp.network)
    chunks = []
    for k, trace in enumerate(traces, start=1):
        chunks.append(f"layer {k}\n" + render_trace(trace))
    rendered = " ".join(str(v) for v in outputs)
    chunks.append(f"outputs [{rendered}]\n")
    text = "".join(chunks)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"trace -> {args.output}", file=sys.stderr)
    else:
        print(text, end="")
    return 0


def _cmd_selfcheck(args: argparse.Namespace) -> int:
    ok = selfcheck.run_selfcheck(samples=args.samples, trials=args.trials, seed=args.seed_value)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpufa",
        description="Exact error-probability analysis of stuck-at faults in a systolic-array accelerator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="exact error probability for one fault configuration")
    _add_common_args(p)
    p.add_argument("--show-trace", action="store_true", help="print a trace of one diverging input")
    p.add_argument("--output", type=Path, help="also write the report to a file")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("sweep-bits", help="weight-register faults across bit positions")
    _add_common_args(p)
    _add_sweep_args(p)
    p.set_defaults(func=_cmd_sweep_bits)

    p = sub.add_parser("sweep-layers", help="weight-register faults across layer counts")
    _add_common_args(p)
    _add_sweep_args(p)
    p.set_defaults(func=_cmd_sweep_layers)

    p = sub.add_parser("sweep-row", help="multiplier/accumulator faults across MAC rows")
    _add_common_args(p)
    _add_sweep_args(p)
    p.add_argument("--rows-swept", type=parse_int_set, help="faulty rows, e.g. 1..4")
    p.set_defaults(func=_cmd_sweep_row)

    p = sub.add_parser("export-model", help="write model-checker input files")
    _add_common_args(p)
    p.add_argument("--output-dir", type=Path, required=True)
    p.set_defaults(func=_cmd_export_model)

    p = sub.add_parser("simulate-trace", help="cycle-by-cycle trace of one input vector")
    _add_common_args(p)
    p.add_argument("--input", required=True, help="comma-separated activations, e.g. 3,7,0,1")
    p.add_argument("--output", type=Path, help="write the trace to a file")
    p.set_defaults(func=_cmd_simulate_trace)

    p = sub.add_parser("selfcheck", help="run the cross-engine equivalence suite")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", dest="seed_value", type=int, default=0)
    p.set_defaults(func=_cmd_selfcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

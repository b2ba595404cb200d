"""Probabilistic model of the analysis: input-selection chains, the execution
automaton, exact reachability of the error outcome, and model-checker export.

The composed model is one joint input-selection step (the N per-neuron
selection chains synchronized on a shared transition label), followed per
input vector by the deterministic execution loop: load, then L rounds of
array computation plus activation/quantization, then a final comparison that
reaches exactly one of the two absorbing outcomes.  Because that structure is
a finite DAG, the probability of eventually reaching the error state equals
the probability-weighted count of input vectors whose faulty output differs
from the fault-free one; the evaluator enumerates the input space instead of
materializing the product, which is only built explicitly at toy scale.

All probabilities are exact rationals; floating-point views are derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .fixedpoint import QuantizationStrategy
from .network import NetworkConfig, layer_reference_batch, validate_weight_matrix
from .faultmodel import (
    FaultDescriptor,
    FaultSite,
    fault_geometry,
    layer_faulty_batch,
    validate_fault,
)
from .systolic import simulate_layer_batch

ENUMERATION_GUARD_BITS = 24
EXPORT_STATE_GUARD = 10**6
_CHUNK = 1 << 16


@dataclass(frozen=True)
class InputDistribution:
    """Independent per-neuron distributions over the activation values."""

    per_neuron: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        for i, probs in enumerate(self.per_neuron):
            if any(p < 0 for p in probs):
                raise ValueError(f"neuron {i + 1}: negative probability")
            if sum(probs, Fraction(0)) != 1:
                raise ValueError(f"neuron {i + 1}: probabilities sum to {sum(probs, Fraction(0))}, not 1")

    @classmethod
    def uniform(cls, neurons: int, value_count: int) -> "InputDistribution":
        row = tuple(Fraction(1, value_count) for _ in range(value_count))
        return cls(tuple(row for _ in range(neurons)))

    @classmethod
    def from_file(cls, path: str | Path, neurons: int, value_count: int) -> "InputDistribution":
        """Parse one line of value_count rationals per neuron (a single line is
        shared by all neurons)."""
        rows = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                probs = tuple(Fraction(tok) for tok in stripped.split())
            except (ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"{path}:{lineno}: not a probability row: {line!r}") from exc
            if len(probs) != value_count:
                raise ValueError(f"{path}:{lineno}: expected {value_count} probabilities, got {len(probs)}")
            rows.append(probs)
        if len(rows) == 1:
            rows = rows * neurons
        if len(rows) != neurons:
            raise ValueError(f"{path}: expected 1 or {neurons} distribution rows, got {len(rows)}")
        return cls(tuple(rows))

    @property
    def is_uniform(self) -> bool:
        value_count = len(self.per_neuron[0])
        u = Fraction(1, value_count)
        return all(p == u for probs in self.per_neuron for p in probs)


@dataclass(frozen=True)
class Transition:
    source: str
    label: str
    probability: Fraction
    target: str


@dataclass(frozen=True)
class Dtmc:
    """Explicit labeled DTMC.  States without outgoing transitions are
    absorbing via an implicit probability-1 self-loop."""

    states: tuple[str, ...]
    initial: str
    transitions: tuple[Transition, ...]
    labels: dict[str, frozenset[str]] = field(default_factory=dict)

    def validate(self) -> None:
        known = set(self.states)
        if self.initial not in known:
            raise ValueError(f"initial state {self.initial!r} not in state set")
        outgoing: dict[str, Fraction] = {}
        for t in self.transitions:
            if t.source not in known or t.target not in known:
                raise ValueError(f"transition {t} references unknown state")
            if not 0 <= t.probability <= 1:
                raise ValueError(f"transition probability {t.probability} outside [0, 1]")
            outgoing[t.source] = outgoing.get(t.source, Fraction(0)) + t.probability
        for s, total in outgoing.items():
            if total != 1:
                raise ValueError(f"state {s!r}: outgoing probabilities sum to {total}, not 1")

    def absorbing_states(self) -> set[str]:
        with_out = {t.source for t in self.transitions if t.source != t.target}
        return {s for s in self.states if s not in with_out}

    def reachability_probability(self, proposition: str) -> Fraction:
        """Exact probability of eventually reaching a state labeled with
        ``proposition``.  Requires the chain (minus absorbing self-loops) to be
        acyclic, which holds for every model this module builds."""
        succ: dict[str, list[Transition]] = {}
        indeg: dict[str, int] = {s: 0 for s in self.states}
        for t in self.transitions:
            if t.source == t.target:
                continue
            succ.setdefault(t.source, []).append(t)
            indeg[t.target] += 1
        order = [s for s in self.states if indeg[s] == 0]
        queue = list(order)
        while queue:
            s = queue.pop()
            for t in succ.get(s, ()):
                indeg[t.target] -= 1
                if indeg[t.target] == 0:
                    order.append(t.target)
                    queue.append(t.target)
        if len(order) != len(self.states):
            raise ValueError("chain is not acyclic apart from absorbing self-loops")
        mass: dict[str, Fraction] = {s: Fraction(0) for s in self.states}
        mass[self.initial] = Fraction(1)
        hit = Fraction(0)
        for s in order:
            if proposition in self.labels.get(s, frozenset()):
                hit += mass[s]
                continue
            for t in succ.get(s, ()):
                mass[t.target] += mass[s] * t.probability
        return hit


def build_is_dtmc(probabilities: Sequence[Fraction]) -> Dtmc:
    """Input-selection chain for one neuron: s0 branches once over all values.

    State s_z (z >= 1) means value z-1 was selected and is absorbing; the
    chain has 2**b + 1 states and 2**b transitions for b-bit values.
    """
    probs = tuple(Fraction(p) for p in probabilities)
    if sum(probs, Fraction(0)) != 1:
        raise ValueError(f"probabilities sum to {sum(probs, Fraction(0))}, not 1")
    if any(p < 0 for p in probs):
        raise ValueError("negative probability")
    v = len(probs)
    states = tuple(f"s{z}" for z in range(v + 1))
    transitions = tuple(
        Transition("s0", f"i{z + 1}", probs[z], f"s{z + 1}") for z in range(v)
    )
    labels = {"s0": frozenset({"not_selected"})}
    labels.update({f"s{z}": frozenset({"selected"}) for z in range(1, v + 1)})
    return Dtmc(states, "s0", transitions, labels)


class TpuFaAutomaton:
    """Deterministic execution automaton: load inputs, loop array computation
    and activation/quantization once per layer, then compare both outputs."""

    STATES = ("s0", "s1", "s2", "s3", "s4")
    INITIAL = "s0"
    TRANSITION_LABELS = ("Init", "SA", "AF&Q", "No Error", "Error")
    PROPOSITIONS = {
        "s0": frozenset({"begin"}),
        "s1": frozenset({"ready"}),
        "s2": frozenset({"calculating"}),
        "s3": frozenset({"end"}),
        "s4": frozenset({"end", "error"}),
    }

    def __init__(self, cfg: NetworkConfig, weights: np.ndarray, fault: FaultDescriptor) -> None:
        self.cfg = cfg
        self.weights = validate_weight_matrix(weights, cfg)
        validate_fault(fault, cfg)
        self.fault = fault

    def trajectory(self, acts: Sequence[int]) -> list[tuple[str | None, str]]:
        """State sequence for one input vector, with the label taken to enter
        each state: s0, then (s1 s2)* once per layer, then s3 or s4."""
        from .network import forward_layer_reference
        from .faultmodel import forward_layer_faulty

        path: list[tuple[str | None, str]] = [(None, "s0")]
        ref = tuple(acts)
        flt = tuple(acts)
        path.append(("Init", "s1"))
        for _ in range(self.cfg.layers):
            path.append(("SA", "s2"))
            ref = forward_layer_reference(ref, self.weights, self.cfg)
            flt = forward_layer_faulty(flt, self.weights, self.fault, self.cfg)
            path.append(("AF&Q", "s1"))
        if ref == flt:
            path.append(("No Error", "s3"))
        else:
            path.append(("Error", "s4"))
        return path


@dataclass(frozen=True)
class AnalysisResult:
    """Outcome of one exact analysis."""

    p_error: Fraction
    error_count: int
    total_count: int
    first_divergence: dict[int, int]
    state_count: int
    transition_count: int

    @property
    def p_error_float(self) -> float:
        return float(self.p_error)


def input_space_size(cfg: NetworkConfig) -> int:
    return cfg.widths.activation_values ** cfg.neurons


def _check_enumeration_guard(cfg: NetworkConfig) -> None:
    bits = cfg.neurons * cfg.widths.activation_bits
    if bits > ENUMERATION_GUARD_BITS:
        raise ValueError(
            f"input space needs {bits} bits; exact enumeration is limited to "
            f"{ENUMERATION_GUARD_BITS} (neurons * activation_bits)"
        )


def _decode_inputs(indices: np.ndarray, value_count: int, neurons: int) -> np.ndarray:
    powers = value_count ** np.arange(neurons - 1, -1, -1, dtype=np.int64)
    return (indices[:, None] // powers[None, :]) % value_count


def _layer_index_maps(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    use_simulator: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Encode the per-layer activation maps as index arrays over the input space.

    Index i encodes the vector whose first neuron holds the most significant
    base-v digit; both engines produce total maps because quantized outputs
    stay in range.
    """
    v = cfg.widths.activation_values
    n = cfg.neurons
    total = v**n
    one_layer = NetworkConfig(
        rows=cfg.rows, cols=cfg.cols, layers=1, neurons=n, widths=cfg.widths,
        quantization=cfg.quantization, signed_mode=cfg.signed_mode,
    )
    powers = v ** np.arange(n - 1, -1, -1, dtype=np.int64)
    ref_map = np.empty(total, dtype=np.int32)
    fault_map = np.empty(total, dtype=np.int32)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        acts = _decode_inputs(idx, v, n)
        if use_simulator:
            ref_out = simulate_layer_batch(acts, weights, None, one_layer)
            flt_out = (
                simulate_layer_batch(acts, weights, fault, one_layer) if fault is not None else ref_out
            )
        else:
            ref_out = layer_reference_batch(acts, weights, one_layer)
            flt_out = (
                layer_faulty_batch(acts, weights, fault, one_layer) if fault is not None else ref_out
            )
        ref_map[start : start + len(idx)] = ref_out @ powers
        fault_map[start : start + len(idx)] = flt_out @ powers
    return ref_map, fault_map


def _divergence_profile(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    use_simulator: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """(final error mask, first-divergence layer per input index; 0 = never)."""
    ref_map, fault_map = _layer_index_maps(cfg, weights, fault, use_simulator)
    total = len(ref_map)
    ref = np.arange(total, dtype=np.int32)
    flt = ref.copy()
    first_div = np.zeros(total, dtype=np.int32)
    for layer in range(1, cfg.layers + 1):
        ref = ref_map[ref]
        flt = fault_map[flt]
        newly = (first_div == 0) & (ref != flt)
        first_div[newly] = layer
    return ref != flt, first_div


def _mass_of_mask(mask: np.ndarray, dist: InputDistribution, cfg: NetworkConfig) -> Fraction:
    """Exact probability of the masked set of input indices under ``dist``."""
    v = cfg.widths.activation_values
    n = cfg.neurons
    total = len(mask)
    if dist.is_uniform:
        return Fraction(int(mask.sum()), total)
    dens = [math.lcm(*(p.denominator for p in probs)) for probs in dist.per_neuron]
    numerators = [
        np.array([int(p * den) for p in probs], dtype=np.int64)
        for probs, den in zip(dist.per_neuron, dens)
    ]
    denominator = math.prod(dens)
    if denominator < 2**62:
        weight_sum = 0
        indices = np.nonzero(mask)[0].astype(np.int64)
        for start in range(0, len(indices), _CHUNK):
            digits = _decode_inputs(indices[start : start + _CHUNK], v, n)
            w = np.ones(len(digits), dtype=np.int64)
            for k in range(n):
                w *= numerators[k][digits[:, k]]
            weight_sum += int(w.sum())
        return Fraction(weight_sum, denominator)
    # Denominators too large for machine words: exact big-int fallback.
    weight_sum = 0
    for i in np.nonzero(mask)[0]:
        rest = int(i)
        w = 1
        for k in range(n - 1, -1, -1):
            rest, digit = divmod(rest, v)
            w *= int(numerators[k][digit])
        weight_sum += w
    return Fraction(weight_sum, denominator)


def _prepare(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    dist: InputDistribution | None,
) -> tuple[np.ndarray, InputDistribution]:
    _check_enumeration_guard(cfg)
    w = validate_weight_matrix(weights, cfg)
    if fault is not None:
        validate_fault(fault, cfg)
    if dist is None:
        dist = InputDistribution.uniform(cfg.neurons, cfg.widths.activation_values)
    if len(dist.per_neuron) != cfg.neurons:
        raise ValueError(f"distribution covers {len(dist.per_neuron)} neurons, config has {cfg.neurons}")
    if len(dist.per_neuron[0]) != cfg.widths.activation_values:
        raise ValueError(
            f"distribution has {len(dist.per_neuron[0])} values per neuron, "
            f"config needs {cfg.widths.activation_values}"
        )
    return w, dist


def probability_of_error(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    dist: InputDistribution | None = None,
) -> AnalysisResult:
    """Exact probability that the faulty output differs from the fault-free one.

    Evaluates the closed-form fault model over the whole input space; equal by
    construction to the reachability probability of the error state in the
    composed model.
    """
    w, dist = _prepare(cfg, weights, fault, dist)
    err_mask, first_div = _divergence_profile(cfg, w, fault, use_simulator=False)
    p = _mass_of_mask(err_mask, dist, cfg)
    layers, counts = np.unique(first_div[first_div > 0], return_counts=True)
    histogram = {int(l): int(c) for l, c in zip(layers, counts)}
    model = compose_model(cfg, w, fault, dist)
    return AnalysisResult(
        p_error=p,
        error_count=int(err_mask.sum()),
        total_count=len(err_mask),
        first_divergence=histogram,
        state_count=model.state_count,
        transition_count=model.transition_count,
    )


def brute_force_probability(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    dist: InputDistribution | None = None,
) -> Fraction:
    """Same probability through the cycle-accurate simulator (independent route)."""
    w, dist = _prepare(cfg, weights, fault, dist)
    err_mask, _ = _divergence_profile(cfg, w, fault, use_simulator=True)
    return _mass_of_mask(err_mask, dist, cfg)


def first_diverging_input(
    cfg: NetworkConfig, weights: np.ndarray, fault: FaultDescriptor
) -> tuple[int, ...] | None:
    """Lexicographically first input vector whose final outputs differ."""
    w, _ = _prepare(cfg, weights, fault, None)
    err_mask, _ = _divergence_profile(cfg, w, fault, use_simulator=False)
    hits = np.nonzero(err_mask)[0]
    if len(hits) == 0:
        return None
    v = cfg.widths.activation_values
    digits = _decode_inputs(np.array([hits[0]], dtype=np.int64), v, cfg.neurons)
    return tuple(int(x) for x in digits[0])


@dataclass(frozen=True)
class ComposedModel:
    """Parallel composition of the N selection chains and the execution
    automaton, evaluated on the fly.

    The joint selection step branches once over all input vectors; per vector
    the execution part contributes the deterministic chain s0, (s1 s2)^L, s1,
    terminal.  State and transition counts are exact for the reachable
    product, including one self-loop per absorbing terminal.
    """

    cfg: NetworkConfig
    weights: np.ndarray
    fault: FaultDescriptor | None
    dist: InputDistribution

    @property
    def input_space(self) -> int:
        return input_space_size(self.cfg)

    @property
    def state_count(self) -> int:
        return 1 + self.input_space * (2 * self.cfg.layers + 3)

    @property
    def transition_count(self) -> int:
        return self.input_space * (2 * self.cfg.layers + 4)

    def to_explicit_dtmc(self, max_states: int = 100_000) -> Dtmc:
        """Materialize the product (toy scale; used to validate the counts)."""
        from .network import forward_layer_reference
        from .faultmodel import forward_layer_faulty

        if self.state_count > max_states:
            raise ValueError(f"product has {self.state_count} states, limit is {max_states}")
        v = self.cfg.widths.activation_values
        n = self.cfg.neurons
        states: list[str] = ["choose"]
        labels: dict[str, frozenset[str]] = {"choose": frozenset({"not_selected"})}
        transitions: list[Transition] = []
        for index in range(self.input_space):
            digits = []
            rest = index
            for _ in range(n):
                digits.append(rest % v)
                rest //= v
            vec = tuple(reversed(digits))
            key = ",".join(str(x) for x in vec)
            prob = math.prod(
                (self.dist.per_neuron[k][vec[k]] for k in range(n)), start=Fraction(1)
            )
            base = f"x[{key}]"
            states.append(f"{base}|s0")
            labels[f"{base}|s0"] = frozenset({"selected", "begin"})
            transitions.append(Transition("choose", f"i[{key}]", prob, f"{base}|s0"))
            transitions.append(Transition(f"{base}|s0", "Init", Fraction(1), f"{base}|s1@0"))
            ref = vec
            flt = vec
            for j in range(self.cfg.layers):
                states.append(f"{base}|s1@{j}")
                labels[f"{base}|s1@{j}"] = frozenset({"ready"})
                states.append(f"{base}|s2@{j}")
                labels[f"{base}|s2@{j}"] = frozenset({"calculating"})
                transitions.append(Transition(f"{base}|s1@{j}", "SA", Fraction(1), f"{base}|s2@{j}"))
                transitions.append(Transition(f"{base}|s2@{j}", "AF&Q", Fraction(1), f"{base}|s1@{j + 1}"))
                ref = forward_layer_reference(ref, self.weights, self.cfg)
                if self.fault is not None:
                    flt = forward_layer_faulty(flt, self.weights, self.fault, self.cfg)
                else:
                    flt = ref
            last = f"{base}|s1@{self.cfg.layers}"
            states.append(last)
            labels[last] = frozenset({"ready"})
            if ref == flt:
                terminal = f"{base}|s3"
                labels[terminal] = frozenset({"end"})
                transitions.append(Transition(last, "No Error", Fraction(1), terminal))
            else:
                terminal = f"{base}|s4"
                labels[terminal] = frozenset({"end", "error"})
                transitions.append(Transition(last, "Error", Fraction(1), terminal))
            states.append(terminal)
            transitions.append(Transition(terminal, "halt", Fraction(1), terminal))
        dtmc = Dtmc(tuple(states), "choose", tuple(transitions), labels)
        dtmc.validate()
        return dtmc


def compose_model(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    dist: InputDistribution | None = None,
) -> ComposedModel:
    w = validate_weight_matrix(weights, cfg)
    if fault is not None:
        validate_fault(fault, cfg)
    if dist is None:
        dist = InputDistribution.uniform(cfg.neurons, cfg.widths.activation_values)
    return ComposedModel(cfg, w, fault, dist)


def export_model_checker_format(
    cfg: NetworkConfig,
    weights: np.ndarray,
    fault: FaultDescriptor | None,
    dist: InputDistribution | None,
    destination: str | Path,
) -> tuple[Path, Path]:
    """Write the composed model and the error-reachability query as text files.

    Emits ``model.prism`` (PRISM-language DTMC) and ``property.pctl`` into the
    destination directory; both are deterministic for fixed inputs.
    """
    from . import prism

    model = compose_model(cfg, weights, fault, dist)
    if model.state_count > EXPORT_STATE_GUARD:
        raise ValueError(
            f"composed model has {model.state_count} states, export limit is {EXPORT_STATE_GUARD}"
        )
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    model_path = dest / "model.prism"
    property_path = dest / "property.pctl"
    model_path.write_text(prism.model_text(cfg, model.weights, fault, model.dist))
    property_path.write_text(prism.PROPERTY_TEXT)
    return model_path, property_path

"""Exact error-probability analysis of a single stuck-at fault in a
systolic-array DNN accelerator: closed-form fault effects, a cycle-accurate
simulator oracle, and exact probabilistic reachability over the composed
input-selection / execution model."""

from .fixedpoint import (
    BitWidths,
    QuantizationStrategy,
    StuckSpec,
    Word,
    apply_stuck,
    quantize,
    relu,
    wrap_add,
)
from .network import (
    NetworkConfig,
    column_sum,
    forward_layer_reference,
    forward_network_reference,
    load_weight_matrix,
    mac_product,
    save_weight_matrix,
)
from .faultmodel import (
    FaultDescriptor,
    FaultSite,
    effective_area,
    fault_effect_accumulator,
    fault_effect_multiplier,
    fault_effect_weight,
    forward_layer_faulty,
    forward_network_faulty,
)
from .systolic import Trace, render_trace, simulate_layer, simulate_network
from .dtmc import (
    AnalysisResult,
    InputDistribution,
    TpuFaAutomaton,
    brute_force_probability,
    build_is_dtmc,
    compose_model,
    export_model_checker_format,
    probability_of_error,
)
from .weights import generate_weights
from .config import ExperimentConfig, parse_config

__version__ = "0.1.0"

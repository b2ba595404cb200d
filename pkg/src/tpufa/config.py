"""Experiment configuration: flat key = value sections in plain text.

Example::

    [network]
    rows = 4
    layers = 3

    [fault]
    site = weight
    stuck = 1
    bit = 3
    row = 1
    col = 1

    [sweep]
    bits = 0..3
    layers = 1..5
    seeds = 0..9

Unknown keys, out-of-range values and malformed lines are reported with the
line number and field.  Integer sets accept single values (``4``), inclusive
ranges (``0..3``) and comma lists (``1,3,5`` - elements may be ranges).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .fixedpoint import BitWidths, QuantizationStrategy, StuckSpec
from .network import NetworkConfig
from .faultmodel import FaultDescriptor, FaultSite, site_register_width, validate_fault


class ConfigError(ValueError):
    """A configuration problem, annotated with its source location."""

    def __init__(self, message: str, line: int | None = None, field_name: str | None = None):
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field_name is not None:
            prefix += f"{field_name}: "
        super().__init__(prefix + message)
        self.line = line
        self.field_name = field_name


_KNOWN_KEYS = {
    "network": {
        "rows", "cols", "layers", "neurons", "weight_bits", "activation_bits",
        "multiplier_bits", "accumulator_bits", "quantization", "signed",
    },
    "fault": {"site", "stuck", "bit", "row", "col"},
    "weights": {"file", "seed"},
    "inputs": {"distribution"},
    "output": {"path"},
    "sweep": {"bits", "layers", "rows", "stuck", "seeds"},
}


def parse_int_set(text: str) -> tuple[int, ...]:
    """Parse ``4``, ``0..3`` or ``1,3,5..7`` into a sorted tuple of ints."""
    values: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise ValueError(f"empty element in integer set {text!r}")
        if ".." in part:
            lo_txt, hi_txt = part.split("..", 1)
            lo, hi = int(lo_txt), int(hi_txt)
            if hi < lo:
                raise ValueError(f"range {part!r} is empty (use lo..hi with lo <= hi)")
            values.update(range(lo, hi + 1))
        else:
            values.add(int(part))
    return tuple(sorted(values))


@dataclass(frozen=True)
class SweepRanges:
    """Coordinate ranges for sweep commands (unset fields fall back per command)."""

    bits: tuple[int, ...] | None = None
    layers: tuple[int, ...] | None = None
    rows: tuple[int, ...] | None = None
    stuck: tuple[int, ...] | None = None
    seeds: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs: network shape, fault, weights, inputs, output."""

    network: NetworkConfig = field(default_factory=NetworkConfig)
    fault: FaultDescriptor | None = None
    weights_file: Path | None = None
    weights_seed: int = 0
    distribution_file: Path | None = None
    output: Path | None = None
    sweep: SweepRanges = field(default_factory=SweepRanges)


def _parse_lines(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in _KNOWN_KEYS:
                raise ConfigError(f"unknown section [{current}]", line=lineno)
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        if current is None:
            raise ConfigError("key outside any [section]", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _KNOWN_KEYS[current]:
            raise ConfigError(f"unknown key in [{current}]", line=lineno, field_name=key)
        sections[current][key] = (value.split("#", 1)[0].strip(), lineno)
    return sections


def _get_int(section: dict, key: str, default: int) -> int:
    if key not in section:
        return default
    value, lineno = section[key]
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"not an integer: {value!r}", line=lineno, field_name=key) from None


def _get_bool(section: dict, key: str, default: bool) -> bool:
    if key not in section:
        return default
    value, lineno = section[key]
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}", line=lineno, field_name=key)


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text, applying the default 4x4 array / 4-4-8-10 widths."""
    sections = _parse_lines(text)

    net = sections.get("network", {})
    try:
        widths = BitWidths(
            weight_bits=_get_int(net, "weight_bits", 4),
            activation_bits=_get_int(net, "activation_bits", 4),
            multiplier_bits=_get_int(net, "multiplier_bits", 8),
            accumulator_bits=_get_int(net, "accumulator_bits", 10),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), line=min((l for _, l in net.values()), default=None)) from None
    quant_name, quant_line = net.get("quantization", ("keep-high", None))
    try:
        quantization = QuantizationStrategy.from_name(quant_name)
    except ValueError as exc:
        raise ConfigError(str(exc), line=quant_line, field_name="quantization") from None
    try:
        network = NetworkConfig(
            rows=_get_int(net, "rows", 4),
            cols=_get_int(net, "cols", 4),
            layers=_get_int(net, "layers", 1),
            neurons=_get_int(net, "neurons", 4),
            widths=widths,
            quantization=quantization,
            signed_mode=_get_bool(net, "signed", False),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), line=min((l for _, l in net.values()), default=None)) from None

    fault = None
    if "fault" in sections:
        fs = sections["fault"]
        missing = {"site", "stuck", "bit"} - set(fs)
        if missing:
            raise ConfigError(f"[fault] is missing keys: {', '.join(sorted(missing))}")
        site_name, site_line = fs["site"]
        try:
            site = FaultSite.from_name(site_name)
        except ValueError as exc:
            raise ConfigError(str(exc), line=site_line, field_name="site") from None
        stuck_value = _get_int(fs, "stuck", 1)
        bit = _get_int(fs, "bit", 0)
        try:
            spec = StuckSpec(bit, stuck_value)
            fault = FaultDescriptor(site, spec, _get_int(fs, "row", 1), _get_int(fs, "col", 1))
            validate_fault(fault, network)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), line=fs["site"][1], field_name="fault") from None

    weights_file = None
    weights_seed = 0
    if "weights" in sections:
        ws = sections["weights"]
        if "file" in ws:
            weights_file = Path(ws["file"][0])
        weights_seed = _get_int(ws, "seed", 0)

    distribution_file = None
    if "inputs" in sections:
        ins = sections["inputs"]
        if "distribution" in ins:
            value, lineno = ins["distribution"]
            if value.lower() != "uniform":
                distribution_file = Path(value)

    output = None
    if "output" in sections and "path" in sections["output"]:
        output = Path(sections["output"]["path"][0])

    sweep = SweepRanges()
    if "sweep" in sections:
        sw = sections["sweep"]
        parsed: dict[str, tuple[int, ...]] = {}
        for key in ("bits", "layers", "rows", "stuck", "seeds"):
            if key in sw:
                value, lineno = sw[key]
                try:
                    parsed[key] = parse_int_set(value)
                except ValueError as exc:
                    raise ConfigError(str(exc), line=lineno, field_name=key) from None
        sweep = SweepRanges(
            bits=parsed.get("bits"),
            layers=parsed.get("layers"),
            rows=parsed.get("rows"),
            stuck=parsed.get("stuck"),
            seeds=parsed.get("seeds"),
        )
        _validate_sweep(sweep, network, fault, sections["sweep"])

    return ExperimentConfig(
        network=network,
        fault=fault,
        weights_file=weights_file,
        weights_seed=weights_seed,
        distribution_file=distribution_file,
        output=output,
        sweep=sweep,
    )


def _validate_sweep(
    sweep: SweepRanges,
    network: NetworkConfig,
    fault: FaultDescriptor | None,
    raw: dict,
) -> None:
    if sweep.layers is not None and min(sweep.layers) < 1:
        raise ConfigError("layer counts must be >= 1", line=raw["layers"][1], field_name="layers")
    if sweep.rows is not None and not all(1 <= r <= network.rows for r in sweep.rows):
        raise ConfigError(
            f"row sweep must stay within 1..{network.rows}", line=raw["rows"][1], field_name="rows"
        )
    if sweep.stuck is not None and not set(sweep.stuck) <= {0, 1}:
        raise ConfigError("stuck values must be 0 or 1", line=raw["stuck"][1], field_name="stuck")
    if sweep.bits is not None:
        if min(sweep.bits) < 0:
            raise ConfigError("bit positions must be >= 0", line=raw["bits"][1], field_name="bits")
        if fault is not None:
            width = site_register_width(fault.site, network.widths)
            if max(sweep.bits) >= width:
                raise ConfigError(
                    f"bit {max(sweep.bits)} out of range for the {width}-bit "
                    f"{fault.site.value} register",
                    line=raw["bits"][1],
                    field_name="bits",
                )


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())

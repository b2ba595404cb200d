"""Fixed-width register words with stuck-at bit forcing and wrap-around arithmetic.

All register values are unsigned bit patterns reduced modulo 2**width.  An
optional signed mode changes only the ReLU step: two's-complement negative
values (top bit set) clamp to zero.  Everything else stays plain modular
arithmetic so that the closed-form fault model and the cycle simulator agree
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

MAX_WIDTH = 32


class QuantizationStrategy(Enum):
    """How a wide accumulator value is narrowed to the activation width.

    keep-high: logical right shift discarding the low accumulator bits.
    keep-low:  keep the low activation bits directly.
    saturate:  clamp to the maximum activation value.
    """

    KEEP_HIGH = "keep-high"
    KEEP_LOW = "keep-low"
    SATURATE = "saturate"

    @classmethod
    def from_name(cls, name: str) -> "QuantizationStrategy":
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown quantization strategy {name!r} (choose from: {choices})") from None


def _check_width(width: int, what: str = "width") -> None:
    if not isinstance(width, int) or not 1 <= width <= MAX_WIDTH:
        raise ValueError(f"{what} must be an integer in 1..{MAX_WIDTH}, got {width!r}")


@dataclass(frozen=True)
class BitWidths:
    """Register widths of the MAC datapath (defaults: 4/4-bit operands, 8-bit product, 10-bit sum)."""

    weight_bits: int = 4
    activation_bits: int = 4
    multiplier_bits: int = 8
    accumulator_bits: int = 10

    def __post_init__(self) -> None:
        _check_width(self.weight_bits, "weight_bits")
        _check_width(self.activation_bits, "activation_bits")
        _check_width(self.multiplier_bits, "multiplier_bits")
        _check_width(self.accumulator_bits, "accumulator_bits")

    @property
    def activation_values(self) -> int:
        """Number of representable activation values (2**activation_bits)."""
        return 1 << self.activation_bits


@dataclass(frozen=True)
class Word:
    """An unsigned register value tagged with its bit width."""

    value: int
    width: int

    def __post_init__(self) -> None:
        _check_width(self.width)
        if not 0 <= self.value < (1 << self.width):
            raise ValueError(f"value {self.value} out of range for a {self.width}-bit word")


@dataclass(frozen=True)
class StuckSpec:
    """A permanently forced register bit: index ``bit`` held at level ``stuck``."""

    bit: int
    stuck: int

    def __post_init__(self) -> None:
        if self.bit < 0:
            raise ValueError(f"stuck bit index must be >= 0, got {self.bit}")
        if self.stuck not in (0, 1):
            raise ValueError(f"stuck level must be 0 or 1, got {self.stuck!r}")

    @property
    def mask(self) -> int:
        """Bit mask of the forced position (2**bit)."""
        return 1 << self.bit


def force_bit(value, bit: int, stuck: int):
    """Force one bit of an unsigned value (works on ints and integer ndarrays)."""
    mask = 1 << bit
    if stuck:
        return value | mask
    return value & ~mask


def apply_stuck(word: Word, spec: StuckSpec) -> Word:
    """Return ``word`` with the stuck bit forced; all other bits unchanged."""
    if spec.bit >= word.width:
        raise ValueError(f"stuck bit {spec.bit} out of range for a {word.width}-bit register")
    return Word(force_bit(word.value, spec.bit, spec.stuck), word.width)


def wrap_add(a: Word, b: Word, width: int) -> Word:
    """Modular sum of two words at the given width (no saturation, plain wrap)."""
    _check_width(width)
    return Word((a.value + b.value) & ((1 << width) - 1), width)


def relu(v: Word, signed: bool = False) -> Word:
    """Rectifier over register words.

    Unsigned words pass through unchanged.  In signed mode, words whose top bit
    is set (two's-complement negative) map to zero.
    """
    if signed and (v.value >> (v.width - 1)) & 1:
        return Word(0, v.width)
    return v


def quantize(acc: Word, strategy: QuantizationStrategy, activation_bits: int) -> Word:
    """Narrow an accumulator word to the activation width.

    keep-high shifts out the low (acc.width - activation_bits) bits; keep-low
    masks directly; saturate clamps.  If the accumulator is already narrower
    than the target, the value is kept as-is.
    """
    _check_width(activation_bits, "activation_bits")
    mask = (1 << activation_bits) - 1
    if strategy is QuantizationStrategy.KEEP_HIGH:
        shift = acc.width - activation_bits
        kept = acc.value >> shift if shift > 0 else acc.value
    elif strategy is QuantizationStrategy.KEEP_LOW:
        kept = acc.value
    elif strategy is QuantizationStrategy.SATURATE:
        kept = min(acc.value, mask)
    else:
        raise ValueError(f"unknown quantization strategy {strategy!r}")
    return Word(kept & mask, activation_bits)

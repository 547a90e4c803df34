"""Behavioural models of the circuit vocabulary.

The pure ``*_eval`` functions describe each primitive on its own; the
:class:`~asyncfir.kernel.Component` subclasses wrap the same behaviour for the
event kernel. Word-valued nets carry plain Python ints in two's complement
range, control nets carry 0/1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .kernel import Component, LogicLevel, SimTime

LOW = int(LogicLevel.LOW)
HIGH = int(LogicLevel.HIGH)


class WidthOverflow(ValueError):
    pass


def fits_signed(value: int, width: int) -> bool:
    lim = 1 << (width - 1)
    return -lim <= value < lim


def check_width(value: int, width: int, what: str = "value") -> int:
    if not fits_signed(value, width):
        raise WidthOverflow(f"{what} {value} does not fit in {width} signed bits")
    return value


@dataclass(frozen=True)
class QFormat:
    """Signed fixed-point format with ``int_bits`` (including sign) and ``frac_bits``."""

    int_bits: int = 1
    frac_bits: int = 15

    @property
    def width(self) -> int:
        return self.int_bits + self.frac_bits

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    def __str__(self) -> str:
        return f"Q{self.int_bits}.{self.frac_bits}"

    @classmethod
    def parse(cls, text: str) -> "QFormat":
        text = text.strip()
        if not text.startswith("Q") or "." not in text:
            raise ValueError(f"bad Q-format {text!r}")
        i, f = text[1:].split(".")
        return cls(int(i), int(f))


SAMPLE_BITS = 12
COEFF_FORMAT = QFormat(1, 15)


def accumulator_width(sample_bits: int, coeff_bits: int, taps: int) -> int:
    return sample_bits + coeff_bits + math.ceil(math.log2(taps))


# --- C-element ---------------------------------------------------------------


def c_element_eval(held: int, a: int, b: int) -> int:
    """Muller C-element: follow the inputs when they agree, otherwise hold."""
    if a == b:
        return a
    return held


@dataclass
class CElementState:
    """Output plus last-seen inputs; resets low."""

    output: int = LOW
    inputs: tuple[int, int] = (LOW, LOW)

    def update(self, a: int, b: int) -> int:
        self.inputs = (a, b)
        self.output = c_element_eval(self.output, a, b)
        return self.output


class CElement(Component):
    """Two-input C-element; ``invert`` puts a bubble on either input."""

    kind = "celement"

    def __init__(self, name, a, b, output, delay, invert=(False, False)):
        super().__init__(name, (a, b), output, delay)
        self.a, self.b = a, b
        self.inv_a = int(bool(invert[0]))
        self.inv_b = int(bool(invert[1]))
        self.state = LOW

    def evaluate(self, values):
        a = values[self.a] ^ self.inv_a
        if a == values[self.b] ^ self.inv_b:
            self.state = a
        return self.state

    def describe(self):
        return f"invert={self.inv_a}{self.inv_b}"


# --- storage -------------------------------------------------------------------


class RegisterKind(Enum):
    LEVEL_LATCH = "latch"
    EDGE_DFF = "dff"


@dataclass
class RegisterElement:
    kind: RegisterKind
    width: int
    stored: int = 0
    last_control: int = LOW


def register_eval(reg: RegisterElement, data_in: int, control: int, control_edge: bool) -> int:
    """Update ``reg`` for one evaluation and return the stored word.

    ``control_edge`` says whether ``control`` has just changed; an edge
    flip-flop captures only on a rising edge, a latch whenever control is high.
    """
    check_width(data_in, reg.width, "register input")
    if reg.kind is RegisterKind.EDGE_DFF:
        if control_edge and control == HIGH:
            reg.stored = data_in
    elif control == HIGH:
        reg.stored = data_in
    reg.last_control = control
    return reg.stored


class EdgeDFF(Component):
    kind = "dff"

    def __init__(self, name, d, clk, output, delay, width):
        super().__init__(name, (d, clk), output, delay, sensitivity=(clk,))
        self.d, self.clk = d, clk
        self.width = width
        self.state = 0
        self.last_clk = LOW

    def evaluate(self, values):
        clk = values[self.clk]
        if clk == HIGH and self.last_clk == LOW:
            self.state = values[self.d]
        self.last_clk = clk
        return self.state

    def describe(self):
        return f"width={self.width}"


class LevelLatch(Component):
    kind = "latch"

    def __init__(self, name, d, enable, output, delay, width):
        super().__init__(name, (d, enable), output, delay)
        self.d, self.enable = d, enable
        self.width = width
        self.state = 0

    def evaluate(self, values):
        if values[self.enable] == HIGH:
            self.state = values[self.d]
        return self.state

    def describe(self):
        return f"width={self.width}"


def make_register(kind: RegisterKind, name, d, control, output, delay, width) -> Component:
    if kind is RegisterKind.EDGE_DFF:
        return EdgeDFF(name, d, control, output, delay, width)
    return LevelLatch(name, d, control, output, delay, width)


# --- wiring helpers ----------------------------------------------------------


class DelayElement(Component):
    """Bundled-data matched delay: output copies input after ``delay``."""

    kind = "delay"

    def __init__(self, name, a, output, delay):
        super().__init__(name, (a,), output, delay)
        self.a = a

    def evaluate(self, values):
        return values[self.a]


class Tie(Component):
    """Constant driver; the net's init value carries the constant."""

    kind = "tie"

    def __init__(self, name, output, value):
        super().__init__(name, (), output, 1)
        self.value = value

    def evaluate(self, values):
        return self.value

    def describe(self):
        return f"value={self.value}"


class Stimulus(Component):
    """Placeholder driver for a net that the testbench schedules directly."""

    kind = "stimulus"

    def __init__(self, name, output):
        super().__init__(name, (), output, 1)

    def evaluate(self, values):
        return None


class ClockGen(Component):
    """Free-running clock: an inverter fed back on its own output."""

    kind = "clock"

    def __init__(self, name, output, period: SimTime):
        if period < 2 or period % 2:
            raise ValueError(f"clock period must be an even number of ps >= 2, got {period}")
        super().__init__(name, (output,), output, period // 2)
        self.period = period

    def evaluate(self, values):
        return HIGH - values[self.output]

    def describe(self):
        return f"period={self.period}"


# --- arithmetic ---------------------------------------------------------------


class ArithKind(Enum):
    MULTIPLIER = "mul"
    ADDER = "add"


@dataclass(frozen=True)
class ArithBlock:
    kind: ArithKind
    input_widths: tuple[int, ...]
    output_width: int
    delay: SimTime

    def __post_init__(self):
        if self.kind is ArithKind.MULTIPLIER:
            need = sum(self.input_widths)
        else:
            need = max(self.input_widths) + math.ceil(math.log2(len(self.input_widths)))
        if self.output_width < need:
            raise WidthOverflow(
                f"{self.kind.value} output width {self.output_width} < required {need}"
            )


def arith_eval(block: ArithBlock, operands: Sequence[int]) -> int:
    """Exact two's-complement product or sum, checked against the block widths."""
    if len(operands) != len(block.input_widths):
        raise ValueError(f"expected {len(block.input_widths)} operands, got {len(operands)}")
    for op, w in zip(operands, block.input_widths):
        check_width(op, w, "operand")
    if block.kind is ArithKind.MULTIPLIER:
        result = 1
        for op in operands:
            result *= op
    else:
        result = sum(operands)
    return check_width(result, block.output_width, "result")


class ConstMultiplier(Component):
    """Tap multiplier: register word times a constant quantized coefficient."""

    kind = "mul"

    def __init__(self, name, a, output, delay, coefficient: int, block: ArithBlock):
        super().__init__(name, (a,), output, delay)
        check_width(coefficient, block.input_widths[1], "coefficient")
        self.a = a
        self.coefficient = coefficient
        self.block = block
        self._lim = 1 << (block.output_width - 1)

    def evaluate(self, values):
        out = values[self.a] * self.coefficient
        if not -self._lim <= out < self._lim:
            raise WidthOverflow(f"{self.name}: product {out} overflows")
        return out

    def describe(self):
        return f"coeff={self.coefficient} width={self.block.output_width}"


class Adder(Component):
    kind = "add"

    def __init__(self, name, a, b, output, delay, block: ArithBlock):
        super().__init__(name, (a, b), output, delay)
        self.a, self.b = a, b
        self.block = block
        self._lim = 1 << (block.output_width - 1)

    def evaluate(self, values):
        out = values[self.a] + values[self.b]
        if not -self._lim <= out < self._lim:
            raise WidthOverflow(f"{self.name}: sum {out} overflows")
        return out

    def describe(self):
        return f"width={self.block.output_width}"


class HandshakeSender(Component):
    """Input environment: drops the global request once it is acknowledged.

    Raising the request is done by the testbench (see ``inject_sample``); this
    component only completes the return-to-zero half of the handshake and
    tracks whether a handshake is still in flight.
    """

    kind = "sender"

    def __init__(self, name, ack, output, delay):
        super().__init__(name, (ack,), output, delay)
        self.ack = ack
        self.busy = False
        self._acked = False

    def evaluate(self, values):
        if values[self.ack] == HIGH:
            self._acked = True
            return LOW
        if self._acked:
            self._acked = False
            self.busy = False
        return None


def celement_tree(circuit, name: str, inputs: list[int], delay: SimTime) -> Optional[int]:
    """Balanced binary C-element tree; returns the root net (or the single input)."""
    level = list(inputs)
    depth = 0
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            out = circuit.add_net(f"{name}_l{depth}_{i // 2}")
            circuit.add(CElement(f"{name}_c{depth}_{i // 2}", level[i], level[i + 1], out, delay))
            nxt.append(out)
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
        depth += 1
    return level[0] if level else None

"""Circuit builders for the three filter architectures.

* ``build_original_micropipeline``: classic 4-phase micropipeline, one
  C-element per stage and level-sensitive data latches. Used as the negative
  baseline: a single request lets the token run through every stage.
* ``build_modified_fir``: the gated pipeline. Every stage after the first has
  a token C-element plus a gate C-element that combines the stage with the
  global request, so all stages capture together once per input sample.
* ``build_sync_fir``: clocked reference with a registered multiply/adder tree.

Stage ``k`` holds ``x[n-k]`` once the delay line has filled; stage 0 takes
the filter input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .dsp import Coefficients
from .kernel import Circuit, SimTime, Simulator
from .primitives import (
    HIGH,
    SAMPLE_BITS,
    Adder,
    ArithBlock,
    ArithKind,
    CElement,
    ClockGen,
    Component,
    ConstMultiplier,
    DelayElement,
    EdgeDFF,
    HandshakeSender,
    LevelLatch,
    QFormat,
    RegisterKind,
    Stimulus,
    Tie,
    celement_tree,
    check_width,
    make_register,
)


class InvalidConfig(ValueError):
    pass


class ClockTooFast(InvalidConfig):
    pass


class HandshakeBusy(RuntimeError):
    pass


class Variant(Enum):
    ORIGINAL = "original"
    MODIFIED_DFF = "modified-dff"
    MODIFIED_LATCH = "modified-latch"
    SYNC = "sync"

    @property
    def is_async(self) -> bool:
        return self is not Variant.SYNC


@dataclass(frozen=True)
class DelayConfig:
    """Per-component delays in picoseconds."""

    c_element: int = 100
    dff: int = 200
    latch: int = 150
    ack: int = 100
    multiplier: int = 3000
    adder: int = 1000
    adder_levels: Optional[tuple[int, ...]] = None
    bundling_margin: int = 500
    output_margin: int = 100
    consumer: int = 100
    sender: int = 100

    def adder_level(self, level: int) -> int:
        if self.adder_levels is None:
            return self.adder
        return self.adder_levels[level]

    def validate(self, levels: int) -> None:
        for name in ("c_element", "dff", "latch", "ack", "multiplier", "adder",
                     "output_margin", "consumer", "sender"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"delay {name} must be >= 1 ps")
        if self.bundling_margin < 1:
            raise InvalidConfig("bundling_margin must be >= 1 ps")
        if self.adder_levels is not None:
            if len(self.adder_levels) < levels:
                raise InvalidConfig(f"need {levels} adder level delays, got {len(self.adder_levels)}")
            if min(self.adder_levels) < 1:
                raise InvalidConfig("adder level delays must be >= 1 ps")


def tree_levels(taps: int) -> int:
    return math.ceil(math.log2(taps)) if taps > 1 else 0


@dataclass
class Channel:
    """Handshake channel into a stage: request, acknowledge, bundled data."""

    req: int
    ack: int
    data: Optional[int]


@dataclass
class StageTopology:
    index: int
    token_celement: Optional[Component]
    gate_celement: Optional[Component]
    data_register: Component
    occupancy_register: Component
    req_in: int
    ack_in: int
    req_out: int
    ack_out: int


@dataclass
class FilterCircuit:
    circuit: Circuit
    variant: Variant
    stages: list[StageTopology]
    multipliers: list[Component]
    adders: list[Component]
    pipeline_registers: list[Component]
    global_req: Optional[int]
    global_ack: Optional[int]
    data_in: int
    output_net: int
    output_strobe: int
    channels: list[Channel]
    coefficients: list[int]
    qformat: QFormat
    delays: DelayConfig
    sender: Optional[HandshakeSender] = None
    clock: Optional[int] = None
    clock_period: Optional[SimTime] = None
    depth: int = 0
    sample_bits: int = SAMPLE_BITS
    next_edge: int = field(default=0, repr=False)

    @property
    def taps(self) -> int:
        return len(self.stages)

    @property
    def levels(self) -> int:
        return tree_levels(self.taps)

    def register_nets(self) -> list[int]:
        return [s.data_register.output for s in self.stages]

    def occupancy_nets(self) -> list[int]:
        return [s.occupancy_register.output for s in self.stages]

    def stage_delays(self) -> list[int]:
        """Per-stage data-path delays: register, multiply, then each adder level."""
        reg = self.delays.latch if self.variant is Variant.MODIFIED_LATCH else self.delays.dff
        return [reg, self.delays.multiplier] + [self.delays.adder_level(i) for i in range(self.levels)]

    def control_overhead(self) -> int:
        """Async latency beyond the data path: gate C-element plus output bundling margin."""
        return self.delays.c_element + self.delays.output_margin

    def edge_time(self, k: int) -> SimTime:
        return self.clock_period // 2 + k * self.clock_period

    def netlist(self) -> str:
        return self.circuit.dump()


def _coefficients(taps: int, coefficients: Coefficients) -> tuple[list[int], QFormat]:
    if taps < 2:
        raise InvalidConfig("need at least 2 taps")
    if coefficients.quantized is None:
        raise InvalidConfig("coefficients must be quantized")
    if len(coefficients.quantized) != taps:
        raise InvalidConfig(f"{len(coefficients.quantized)} coefficients for {taps} taps")
    return list(coefficients.quantized), coefficients.qformat


def _mac_tree(c: Circuit, tap_nets, coeffs, qfmt, delays, sample_bits, clk=None):
    """Tap multipliers and a balanced adder tree; registered per level when ``clk``."""
    mults, adders, regs = [], [], []
    width = sample_bits + qfmt.width
    block = ArithBlock(ArithKind.MULTIPLIER, (sample_bits, qfmt.width), width, delays.multiplier)
    level = []
    for k, (net, coeff) in enumerate(zip(tap_nets, coeffs)):
        p = c.add_net(f"p{k}", width)
        mults.append(c.add(ConstMultiplier(f"mul{k}", net, p, delays.multiplier, coeff, block)))
        if clk is not None:
            pr = c.add_net(f"p{k}_r", width)
            regs.append(c.add(EdgeDFF(f"preg{k}", p, clk, pr, delays.dff, width)))
            p = pr
        level.append(p)
    depth = 0
    while len(level) > 1:
        d = delays.adder_level(depth)
        add_block = ArithBlock(ArithKind.ADDER, (width, width), width + 1, d)
        nxt = []
        for i in range(0, len(level) - 1, 2):
            s = c.add_net(f"sum{depth}_{i // 2}", width + 1)
            adders.append(c.add(Adder(f"add{depth}_{i // 2}", level[i], level[i + 1], s, d, add_block)))
            nxt.append(s)
        if len(level) % 2:
            nxt.append(level[-1])
        width += 1
        is_last = len(nxt) == 1
        if clk is not None and not is_last:
            registered = []
            for j, s in enumerate(nxt):
                sr = c.add_net(f"sum{depth}_{j}_r", width)
                regs.append(c.add(EdgeDFF(f"sreg{depth}_{j}", s, clk, sr, delays.dff, width)))
                registered.append(sr)
            nxt = registered
        level = nxt
        depth += 1
    return level[0], mults, adders, regs, width


def build_modified_fir(
    taps: int,
    coefficients: Coefficients,
    delays: DelayConfig = DelayConfig(),
    register_kind: RegisterKind = RegisterKind.EDGE_DFF,
    sample_bits: int = SAMPLE_BITS,
) -> FilterCircuit:
    """Gated micropipeline FIR.

    Stage 0 is a plain micropipeline stage whose request input is the global
    request. Stage ``k >= 1`` has a token C-element ``C(req_k, ack_{k+1})``
    and a gate C-element ``C(greq, not token_k)`` producing ``req_k``, which
    clocks the stage register. With the gate holding every stage until the
    global request, all registers capture in the same instant.
    """
    coeffs, qfmt = _coefficients(taps, coefficients)
    levels = tree_levels(taps)
    delays.validate(levels)
    reg_delay = delays.dff if register_kind is RegisterKind.EDGE_DFF else delays.latch
    if delays.ack >= reg_delay:
        raise InvalidConfig("stage acknowledge must precede the register output change (ack < register delay)")

    variant = Variant.MODIFIED_DFF if register_kind is RegisterKind.EDGE_DFF else Variant.MODIFIED_LATCH
    c = Circuit(f"fir_{variant.value}")
    greq = c.add_net("greq")
    data_in = c.add_net("data_in", sample_bits)
    c.add(Stimulus("src_data", data_in))
    one = c.add_net("tie1", init=1)
    c.add(Tie("tie_hi", one, 1))

    req = [c.add_net(f"s{k}_req") for k in range(taps)]
    ack = [c.add_net(f"s{k}_ack") for k in range(taps)]
    q = [c.add_net(f"s{k}_q", sample_bits) for k in range(taps)]
    occ = [c.add_net(f"s{k}_occ") for k in range(taps)]
    out_req = c.add_net("out_req")
    out_ack = c.add_net("out_ack")
    ack_next = ack[1:] + [out_ack]

    stages = []
    for k in range(taps):
        if k == 0:
            token = c.add(CElement("s0_c1", greq, ack_next[0], req[0], delays.c_element, invert=(False, True)))
            gate = None
        else:
            tok = c.add_net(f"s{k}_tok")
            token = c.add(CElement(f"s{k}_c1", req[k], ack_next[k], tok, delays.c_element))
            gate = c.add(CElement(f"s{k}_c2", greq, tok, req[k], delays.c_element, invert=(False, True)))
        c.add(DelayElement(f"s{k}_ackd", req[k], ack[k], delays.ack))
        d = data_in if k == 0 else q[k - 1]
        reg = c.add(make_register(register_kind, f"s{k}_reg", d, req[k], q[k], reg_delay, sample_bits))
        occ_reg = c.add(EdgeDFF(f"s{k}_occreg", one if k == 0 else occ[k - 1], req[k], occ[k], delays.dff, 1))
        stages.append(StageTopology(
            k, token, gate, reg, occ_reg,
            req_in=req[k], ack_in=ack[k],
            req_out=req[k + 1] if k + 1 < taps else out_req, ack_out=ack_next[k],
        ))

    y, mults, adders, _, _ = _mac_tree(c, q, coeffs, qfmt, delays, sample_bits)
    match = reg_delay + delays.multiplier + sum(delays.adder_level(i) for i in range(levels)) + delays.output_margin
    c.add(DelayElement("out_match", req[-1], out_req, match))
    c.add(DelayElement("consumer", out_req, out_ack, delays.consumer))
    gack = celement_tree(c, "gack", ack + [out_ack], delays.c_element)
    sender = c.add(HandshakeSender("sender", gack, greq, delays.sender))
    c.check_well_formed()

    channels = [Channel(req[k], ack[k], data_in if k == 0 else q[k - 1]) for k in range(taps)]
    channels.append(Channel(out_req, out_ack, y))
    return FilterCircuit(
        c, variant, stages, mults, adders, [], greq, gack, data_in, y, out_req,
        channels, coeffs, qfmt, delays, sender=sender, sample_bits=sample_bits,
    )


def build_original_micropipeline(
    taps: int,
    coefficients: Coefficients,
    delays: DelayConfig = DelayConfig(),
    sample_bits: int = SAMPLE_BITS,
) -> FilterCircuit:
    """Classic 4-phase micropipeline: ``C_k = C(req_k, not C_{k+1})``, latch enabled by ``C_k``.

    Requests between stages pass through a matched delay covering the latch.
    """
    coeffs, qfmt = _coefficients(taps, coefficients)
    levels = tree_levels(taps)
    delays.validate(levels)

    c = Circuit("fir_original")
    greq = c.add_net("greq")
    data_in = c.add_net("data_in", sample_bits)
    c.add(Stimulus("src_data", data_in))
    one = c.add_net("tie1", init=1)
    c.add(Tie("tie_hi", one, 1))

    ctl = [c.add_net(f"s{k}_c") for k in range(taps)]
    req = [greq] + [c.add_net(f"s{k}_req") for k in range(1, taps)]
    q = [c.add_net(f"s{k}_q", sample_bits) for k in range(taps)]
    occ = [c.add_net(f"s{k}_occ") for k in range(taps)]
    out_req = c.add_net("out_req")
    out_ack = c.add_net("out_ack")
    ack_next = ctl[1:] + [out_ack]
    bundle = delays.latch + delays.bundling_margin

    stages = []
    for k in range(taps):
        if k > 0:
            c.add(DelayElement(f"s{k}_reqd", ctl[k - 1], req[k], bundle))
        token = c.add(CElement(f"s{k}_c1", req[k], ack_next[k], ctl[k], delays.c_element, invert=(False, True)))
        d = data_in if k == 0 else q[k - 1]
        reg = c.add(LevelLatch(f"s{k}_reg", d, ctl[k], q[k], delays.latch, sample_bits))
        occ_reg = c.add(LevelLatch(f"s{k}_occreg", one if k == 0 else occ[k - 1], ctl[k], occ[k], delays.latch, 1))
        stages.append(StageTopology(
            k, token, None, reg, occ_reg,
            req_in=req[k], ack_in=ctl[k],
            req_out=req[k + 1] if k + 1 < taps else out_req, ack_out=ack_next[k],
        ))

    y, mults, adders, _, _ = _mac_tree(c, q, coeffs, qfmt, delays, sample_bits)
    c.add(DelayElement("out_reqd", ctl[-1], out_req, bundle))
    c.add(DelayElement("consumer", out_req, out_ack, delays.consumer))
    sender = c.add(HandshakeSender("sender", ctl[0], greq, delays.sender))
    c.check_well_formed()

    channels = [Channel(req[k], ctl[k], data_in if k == 0 else q[k - 1]) for k in range(taps)]
    channels.append(Channel(out_req, out_ack, None))
    return FilterCircuit(
        c, Variant.ORIGINAL, stages, mults, adders, [], greq, ctl[0], data_in, y, out_req,
        channels, coeffs, qfmt, delays, sender=sender, sample_bits=sample_bits,
    )


def min_clock_period(delays: DelayConfig, taps: int) -> int:
    """Slowest clocked stage: register clock-to-output plus its combinational block."""
    levels = tree_levels(taps)
    comb = [delays.multiplier] + [delays.adder_level(i) for i in range(levels)]
    return delays.dff + max(comb)


def build_sync_fir(
    taps: int,
    coefficients: Coefficients,
    clock_period: SimTime,
    delays: DelayConfig = DelayConfig(),
    sample_bits: int = SAMPLE_BITS,
) -> FilterCircuit:
    """Clocked FIR: register delay line, registered products, one register rank per adder level."""
    coeffs, qfmt = _coefficients(taps, coefficients)
    levels = tree_levels(taps)
    delays.validate(levels)
    need = min_clock_period(delays, taps)
    if clock_period < need:
        raise ClockTooFast(f"clock period {clock_period} ps < slowest stage {need} ps")

    c = Circuit("fir_sync")
    clk = c.add_net("clk")
    c.add(ClockGen("clkgen", clk, clock_period))
    data_in = c.add_net("data_in", sample_bits)
    c.add(Stimulus("src_data", data_in))
    one = c.add_net("tie1", init=1)
    c.add(Tie("tie_hi", one, 1))

    q = [c.add_net(f"s{k}_q", sample_bits) for k in range(taps)]
    occ = [c.add_net(f"s{k}_occ") for k in range(taps)]
    stages = []
    for k in range(taps):
        d = data_in if k == 0 else q[k - 1]
        reg = c.add(EdgeDFF(f"s{k}_reg", d, clk, q[k], delays.dff, sample_bits))
        occ_reg = c.add(EdgeDFF(f"s{k}_occreg", one if k == 0 else occ[k - 1], clk, occ[k], delays.dff, 1))
        stages.append(StageTopology(k, None, None, reg, occ_reg, clk, clk, clk, clk))

    y, mults, adders, regs, width = _mac_tree(c, q, coeffs, qfmt, delays, sample_bits, clk=clk)
    y_reg = c.add_net("y_r", width)
    regs.append(c.add(EdgeDFF("out_reg", y, clk, y_reg, delays.dff, width)))
    c.check_well_formed()
    return FilterCircuit(
        c, Variant.SYNC, stages, mults, adders, regs, None, None, data_in, y, clk,
        [], coeffs, qfmt, delays, clock=clk, clock_period=clock_period,
        depth=1 + levels, sample_bits=sample_bits,
    )


def build(variant: Variant, coefficients: Coefficients, delays: DelayConfig = DelayConfig(),
          clock_period: Optional[SimTime] = None) -> FilterCircuit:
    taps = len(coefficients)
    if variant is Variant.ORIGINAL:
        return build_original_micropipeline(taps, coefficients, delays)
    if variant is Variant.MODIFIED_DFF:
        return build_modified_fir(taps, coefficients, delays, RegisterKind.EDGE_DFF)
    if variant is Variant.MODIFIED_LATCH:
        return build_modified_fir(taps, coefficients, delays, RegisterKind.LEVEL_LATCH)
    if clock_period is None:
        clock_period = min_clock_period(delays, taps)
        clock_period += clock_period % 2
    return build_sync_fir(taps, coefficients, clock_period, delays)


# --- stimulus ----------------------------------------------------------------


def inject_sample(sim: Simulator, fc: FilterCircuit, sample: int, at: SimTime) -> SimTime:
    """Present one input sample; returns the time the request (or capturing edge) occurs.

    Async variants drive ``data_in`` at ``at`` and raise the global request
    one bundling margin later. The sync variant places the sample ahead of
    the next unused clock edge.
    """
    check_width(sample, fc.sample_bits, "sample")
    if at < sim.now:
        raise ValueError(f"injection time {at} is before current time {sim.now}")
    if fc.variant is Variant.SYNC:
        margin = min(fc.delays.bundling_margin, fc.clock_period // 2)
        k = fc.next_edge
        while fc.edge_time(k) - margin < at:
            k += 1
        sim.schedule(fc.data_in, sample, fc.edge_time(k) - margin)
        fc.next_edge = k + 1
        return fc.edge_time(k)
    if fc.sender.busy:
        raise HandshakeBusy("previous input handshake still in flight")
    sim.schedule(fc.data_in, sample, at)
    t_req = at + fc.delays.bundling_margin
    sim.schedule(fc.global_req, HIGH, t_req)
    fc.sender.busy = True
    return t_req


@dataclass
class RunResult:
    outputs: list[int]
    input_times: list[SimTime]
    output_times: list[SimTime]
    stats: object = None


class OutputRecorder:
    """Samples the output word on every rising edge of the output strobe."""

    def __init__(self, sim: Simulator, fc: FilterCircuit):
        self.sim = sim
        self.fc = fc
        self.times: list[SimTime] = []
        self.values: list[int] = []
        self._pid = sim.attach_probe(fc.output_strobe, self._on_strobe)

    def _on_strobe(self, time, net, level):
        if level == HIGH:
            self.times.append(time)
            self.values.append(self.sim.values[self.fc.output_net])

    def detach(self):
        self.sim.detach_probe(self._pid)


def run_samples(
    fc: FilterCircuit,
    samples: Sequence[int],
    sim: Optional[Simulator] = None,
    period: Optional[SimTime] = None,
) -> RunResult:
    """Stream ``samples`` through the circuit and collect one output per sample.

    Async variants inject a sample once the previous handshake has completed
    (no earlier than ``n * period`` when a period is given). The sync variant
    feeds one sample per clock edge.
    """
    if sim is None:
        sim = Simulator(fc.circuit)
    rec = OutputRecorder(sim, fc)
    inputs = []
    if fc.variant is Variant.SYNC:
        for s in samples:
            inputs.append(inject_sample(sim, fc, int(s), sim.now))
        if inputs:
            last = inputs[-1] + fc.depth * fc.clock_period
            stats = sim.run_until(last)
        else:
            stats = sim.run_until(sim.now)
        rec.detach()
        first = round((inputs[0] - fc.edge_time(0)) / fc.clock_period) if inputs else 0
        outs = rec.values[first + fc.depth: first + fc.depth + len(inputs)]
        times = rec.times[first + fc.depth: first + fc.depth + len(inputs)]
        return RunResult(outs, inputs, times, stats)

    sim.run()
    for n, s in enumerate(samples):
        at = sim.now + 1
        if period is not None:
            at = max(at, n * period)
        inputs.append(inject_sample(sim, fc, int(s), at))
        stats = sim.run()
    rec.detach()
    return RunResult(rec.values, inputs, rec.times, sim._stats(sim.events_processed))

"""Passive handshake checker and token-occupancy inspection.

The monitor watches each channel's request, acknowledge and bundled data plus
the shared global request. It never drives a net; it only reads probe
callbacks, so attaching it cannot change a simulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from .arch import FilterCircuit, Variant
from .kernel import SimTime, Simulator


class Phase(Enum):
    IDLE = "idle"
    REQ_HIGH = "req_high"
    ACK_HIGH = "ack_high"
    REQ_LOW = "req_low"


HandshakePhase = Phase


class Signal(Enum):
    REQ = "req"
    ACK = "ack"
    GLOBAL_REQ = "greq"
    DATA = "data"


class ViolationKind(Enum):
    ACK_WITHOUT_REQ = "AckWithoutReq"
    REQ_DROPPED_EARLY = "ReqDroppedEarly"
    ACK_DROPPED_EARLY = "AckDroppedEarly"
    STEP_ORDER = "StepOrderViolation"
    DATA_CHANGED = "DataChangedDuringReq"
    TOKEN_FLOOD = "TokenFlood"
    DATA_CORRUPTION = "DataCorruption"


@dataclass(frozen=True)
class ProtocolViolation:
    kind: ViolationKind
    stage: int
    time: SimTime
    detail: str

    def log_line(self) -> str:
        return f"{self.time} {self.stage} {self.kind.value} {self.detail}"


class NotQuiescent(RuntimeError):
    pass


class ProtocolMonitor:
    """Per-channel four-phase state machines.

    ``mode="modified"`` additionally requires request/acknowledge rises while
    the global request is high and falls while it is low.
    """

    def __init__(self, channels: int, mode: str = "modified"):
        if mode not in ("original", "modified"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.phase = [Phase.IDLE] * channels
        self.req = [0] * channels
        self.ack = [0] * channels
        self.greq = 0
        self.violations: list[ProtocolViolation] = []
        self._pids: list[int] = []
        self._sim: Optional[Simulator] = None

    def _flag(self, out, kind, stage, time, detail):
        out.append(ProtocolViolation(kind, stage, time, detail))

    def observe_transition(self, stage: int, signal: Signal, value: int, time: SimTime) -> list[ProtocolViolation]:
        out: list[ProtocolViolation] = []
        if signal is Signal.GLOBAL_REQ:
            self.greq = value
            return out
        if signal is Signal.DATA:
            if self.phase[stage] is Phase.REQ_HIGH:
                self._flag(out, ViolationKind.DATA_CHANGED, stage, time, f"data={value}")
            self.violations.extend(out)
            return out

        gated = self.mode == "modified"
        phase = self.phase[stage]
        if signal is Signal.REQ:
            self.req[stage] = value
            if value:
                if phase is not Phase.IDLE:
                    self._flag(out, ViolationKind.STEP_ORDER, stage, time, f"req rose in phase {phase.value}")
                elif gated and not self.greq:
                    self._flag(out, ViolationKind.STEP_ORDER, stage, time, "req rose while global request low (step 1)")
                self.phase[stage] = Phase.REQ_HIGH
            else:
                if phase is Phase.REQ_HIGH:
                    self._flag(out, ViolationKind.REQ_DROPPED_EARLY, stage, time, "req fell before ack rose")
                elif phase is not Phase.ACK_HIGH:
                    self._flag(out, ViolationKind.STEP_ORDER, stage, time, f"req fell in phase {phase.value}")
                elif gated and self.greq:
                    self._flag(out, ViolationKind.STEP_ORDER, stage, time, "req fell while global request high (step 3)")
                self.phase[stage] = Phase.REQ_LOW if self.ack[stage] else Phase.IDLE
        else:
            self.ack[stage] = value
            if value:
                if not self.req[stage]:
                    self._flag(out, ViolationKind.ACK_WITHOUT_REQ, stage, time, "ack rose with req low")
                elif phase is not Phase.REQ_HIGH:
                    self._flag(out, ViolationKind.STEP_ORDER, stage, time, f"ack rose in phase {phase.value}")
                elif gated and not self.greq:
                    self._flag(out, ViolationKind.STEP_ORDER, stage, time, "ack rose while global request low (step 2)")
                self.phase[stage] = Phase.ACK_HIGH if self.req[stage] else Phase.REQ_LOW
            else:
                if phase is Phase.ACK_HIGH:
                    self._flag(out, ViolationKind.ACK_DROPPED_EARLY, stage, time, "ack fell before req fell")
                elif phase is not Phase.REQ_LOW:
                    self._flag(out, ViolationKind.STEP_ORDER, stage, time, f"ack fell in phase {phase.value}")
                elif gated and self.greq:
                    self._flag(out, ViolationKind.STEP_ORDER, stage, time, "ack fell while global request high (step 4)")
                self.phase[stage] = Phase.REQ_HIGH if self.req[stage] else Phase.IDLE
        self.violations.extend(out)
        return out

    # kernel wiring --------------------------------------------------------------

    def attach(self, sim: Simulator, fc: FilterCircuit) -> None:
        self._sim = sim
        self._pids = _probe_channels(sim, fc, self._cb)

    def detach(self) -> None:
        for pid in self._pids:
            self._sim.detach_probe(pid)
        self._pids.clear()

    def _cb(self, stage, signal):
        def observer(time, net, value):
            self.observe_transition(stage, signal, value, time)
        return observer

    def log_text(self) -> str:
        return format_violations(self.violations)


def _probe_channels(sim, fc, make_cb) -> list[int]:
    pids = []
    if fc.global_req is not None:
        pids.append(sim.attach_probe(fc.global_req, make_cb(-1, Signal.GLOBAL_REQ)))
    for k, ch in enumerate(fc.channels):
        pids.append(sim.attach_probe(ch.req, make_cb(k, Signal.REQ)))
        pids.append(sim.attach_probe(ch.ack, make_cb(k, Signal.ACK)))
        if ch.data is not None:
            pids.append(sim.attach_probe(ch.data, make_cb(k, Signal.DATA)))
    return pids


def monitor_for(fc: FilterCircuit) -> ProtocolMonitor:
    mode = "original" if fc.variant is Variant.ORIGINAL else "modified"
    return ProtocolMonitor(len(fc.channels), mode)


def replay(trace: Iterable[tuple[SimTime, int, Signal, int]], channels: int, mode: str = "modified") -> list[ProtocolViolation]:
    """Run a fresh monitor over a recorded ``(time, stage, signal, value)`` trace."""
    mon = ProtocolMonitor(channels, mode)
    for time, stage, signal, value in trace:
        mon.observe_transition(stage, signal, value, time)
    return mon.violations


class TraceTap:
    """Records the monitor's view of a run as ``(time, stage, signal, value)`` tuples."""

    def __init__(self, sim: Simulator, fc: FilterCircuit):
        self.events: list[tuple[SimTime, int, Signal, int]] = []
        self._sim = sim
        self._pids = _probe_channels(sim, fc, self._cb)

    def _cb(self, stage, signal):
        events = self.events

        def observer(time, net, value):
            events.append((time, stage, signal, value))
        return observer

    def detach(self):
        for pid in self._pids:
            self._sim.detach_probe(pid)


# --- tokens ---------------------------------------------------------------------


@dataclass(frozen=True)
class TokenMap:
    time: SimTime
    tokens: tuple[bool, ...]
    words: tuple[int, ...]


def snapshot_tokens(sim: Simulator, fc: FilterCircuit) -> TokenMap:
    """Per-stage token presence and register words at a quiescent instant."""
    if not sim.quiescent:
        raise NotQuiescent(f"{sim.pending()} events pending at {sim.now} ps")
    values = sim.values
    tokens = tuple(values[n] == 1 for n in fc.occupancy_nets())
    words = tuple(values[n] for n in fc.register_nets())
    return TokenMap(sim.now, tokens, words)


def detect_flood(before: TokenMap, after: TokenMap, injected: int) -> Optional[ProtocolViolation]:
    """Compare two snapshots around one injection against one-step shift semantics.

    A stage is suspicious when it now holds the injected word although a
    one-place shift would have given it something else. More than one stage
    holding the injected word is a failure: ``TokenFlood`` when tokens also
    appeared in more than one stage, ``DataCorruption`` when the token
    advance was proper but the data was overwritten.
    """
    n = len(after.words)
    expected = (injected,) + before.words[:-1]
    holders = [k for k in range(n) if after.words[k] == injected]
    wrong = [k for k in holders if expected[k] != injected]
    if len(holders) <= 1 or not wrong:
        return None
    new_tokens = sum(1 for b, a in zip(before.tokens, after.tokens) if a and not b)
    kind = ViolationKind.TOKEN_FLOOD if new_tokens > 1 else ViolationKind.DATA_CORRUPTION
    detail = f"stages={','.join(map(str, holders))} hold={injected}"
    return ProtocolViolation(kind, wrong[0], after.time, detail)


def format_violations(violations: Iterable[ProtocolViolation]) -> str:
    return "".join(v.log_line() + "\n" for v in violations)

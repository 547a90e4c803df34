"""Deterministic discrete-event simulation kernel.

Time is an integer count of picoseconds. Events are ordered by ``(time, seq)``
where ``seq`` is a global insertion counter, so ties at the same picosecond are
resolved in the order the events were scheduled.

A :class:`Circuit` is a bag of nets and components. Every component drives a
single output net and declares the nets it is sensitive to; when one of those
nets changes the kernel calls ``component.evaluate(values)`` and schedules the
returned level on the output net at ``now + component.delay``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional

SimTime = int


class LogicLevel(IntEnum):
    LOW = 0
    HIGH = 1
    UNKNOWN = -1


class SimulationError(Exception):
    pass


class SchedulingInPast(SimulationError):
    pass


class UnknownNet(SimulationError, KeyError):
    pass


@dataclass(frozen=True, order=True)
class Event:
    time: SimTime
    seq: int
    net: int = field(compare=False)
    level: int = field(compare=False)


@dataclass
class RunStats:
    events_processed: int
    final_time: SimTime
    transitions_per_net: dict[str, int]


@dataclass
class Net:
    id: int
    name: str
    width: int
    init: int


class Component:
    """Base class for anything the kernel can evaluate.

    Subclasses set ``inputs`` (all nets read), ``sensitivity`` (nets that
    trigger evaluation, defaulting to ``inputs``), ``output`` and ``delay``.
    ``evaluate`` returns the new output level or ``None`` for no change.
    """

    kind = "component"

    def __init__(self, name: str, inputs, output: int, delay: SimTime, sensitivity=None):
        if delay < 1:
            raise ValueError(f"{name}: component delay must be at least 1 ps, got {delay}")
        self.name = name
        self.inputs = list(inputs)
        self.sensitivity = list(self.inputs if sensitivity is None else sensitivity)
        self.output = output
        self.delay = delay

    def evaluate(self, values: list) -> Optional[int]:
        raise NotImplementedError

    def describe(self) -> str:
        return ""


class Circuit:
    """Netlist container: named nets plus the components that drive them."""

    def __init__(self, name: str = "top"):
        self.name = name
        self.nets: list[Net] = []
        self.components: list[Component] = []
        self._by_name: dict[str, int] = {}

    def add_net(self, name: str, width: int = 1, init: int = 0) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate net {name!r}")
        nid = len(self.nets)
        self.nets.append(Net(nid, name, width, init))
        self._by_name[name] = nid
        return nid

    def add(self, component: Component) -> Component:
        n = len(self.nets)
        for nid in [*component.inputs, *component.sensitivity, component.output]:
            if not 0 <= nid < n:
                raise UnknownNet(f"{component.name}: net id {nid} is not in the circuit")
        self.components.append(component)
        return component

    def net(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownNet(name) from None

    def net_name(self, nid: int) -> str:
        return self.nets[nid].name

    def drivers(self) -> dict[int, list[Component]]:
        out: dict[int, list[Component]] = {}
        for comp in self.components:
            out.setdefault(comp.output, []).append(comp)
        return out

    def check_well_formed(self) -> None:
        """Raise ``ValueError`` unless every net has exactly one driver."""
        drivers = self.drivers()
        problems = []
        for net in self.nets:
            count = len(drivers.get(net.id, []))
            if count != 1:
                problems.append(f"{net.name}: {count} drivers")
        if problems:
            raise ValueError("netlist not well formed: " + "; ".join(problems))

    def dump(self) -> str:
        lines = []
        for comp in self.components:
            ins = ",".join(self.nets[i].name for i in comp.inputs) or "-"
            extra = comp.describe()
            line = f"{comp.kind} {comp.name} delay={comp.delay} in={ins} out={self.nets[comp.output].name}"
            if extra:
                line += " " + extra
            lines.append(line)
        return "\n".join(lines) + "\n"


Observer = Callable[[SimTime, int, int], None]


class Simulator:
    """Event-driven simulator owning the state of one :class:`Circuit`."""

    def __init__(self, circuit: Circuit, initialize: bool = True):
        self.circuit = circuit
        n = len(circuit.nets)
        self.values: list[int] = [net.init for net in circuit.nets]
        self._projected: list[int] = list(self.values)
        self._fanout: list[list[Component]] = [[] for _ in range(n)]
        for comp in circuit.components:
            for nid in comp.sensitivity:
                if comp not in self._fanout[nid]:
                    self._fanout[nid].append(comp)
        self._probes: list[dict[int, Observer]] = [{} for _ in range(n)]
        self._probe_net: dict[int, int] = {}
        self._next_probe = 0
        self._queue: list[tuple[int, int, int, int]] = []
        self._seq = 0
        self.now: SimTime = 0
        self.events_processed = 0
        self.transitions = [0] * n
        self.trace: Optional[list[tuple[int, int, int, int]]] = None
        if initialize:
            self.initialize()

    def initialize(self) -> None:
        """Evaluate every component once at the current time (reset settle)."""
        values = self.values
        for comp in self.circuit.components:
            out = comp.evaluate(values)
            if out is not None:
                self._push(comp.output, out, self.now + comp.delay)

    def record_trace(self, enabled: bool = True) -> None:
        self.trace = [] if enabled else None

    # scheduling -----------------------------------------------------------

    def _push(self, net: int, level: int, time: SimTime) -> Optional[Event]:
        if level == self._projected[net]:
            return None
        self._projected[net] = level
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (time, seq, net, level))
        return Event(time, seq, net, level)

    def schedule(self, net: int, level: int, time: SimTime) -> Optional[Event]:
        """Enqueue a transition; redundant transitions are dropped (returns None)."""
        if time < self.now:
            raise SchedulingInPast(f"cannot schedule at {time} ps, simulation time is {self.now} ps")
        if not 0 <= net < len(self.values):
            raise UnknownNet(net)
        return self._push(net, level, time)

    def value(self, net: int) -> int:
        return self.values[net]

    def pending(self) -> int:
        return len(self._queue)

    def next_time(self) -> Optional[SimTime]:
        return self._queue[0][0] if self._queue else None

    @property
    def quiescent(self) -> bool:
        return not self._queue

    # probes ---------------------------------------------------------------

    def attach_probe(self, net: int, observer: Observer) -> int:
        if not 0 <= net < len(self.values):
            raise UnknownNet(net)
        pid = self._next_probe
        self._next_probe += 1
        self._probes[net][pid] = observer
        self._probe_net[pid] = net
        return pid

    def detach_probe(self, pid: int) -> None:
        net = self._probe_net.pop(pid)
        del self._probes[net][pid]

    # execution ------------------------------------------------------------

    def _apply(self, time: int, seq: int, net: int, level: int) -> None:
        self.now = time
        self.values[net] = level
        self.transitions[net] += 1
        self.events_processed += 1
        if self.trace is not None:
            self.trace.append((time, seq, net, level))
        probes = self._probes[net]
        if probes:
            for observer in list(probes.values()):
                observer(time, net, level)
        values = self.values
        for comp in self._fanout[net]:
            out = comp.evaluate(values)
            if out is not None and out != self._projected[comp.output]:
                self._push(comp.output, out, time + comp.delay)

    def step(self) -> Optional[Event]:
        if not self._queue:
            return None
        time, seq, net, level = heapq.heappop(self._queue)
        self._apply(time, seq, net, level)
        return Event(time, seq, net, level)

    def run_until(self, t: SimTime) -> RunStats:
        """Process every event with time <= ``t``."""
        queue = self._queue
        pop = heapq.heappop
        apply = self._apply
        start = self.events_processed
        while queue and queue[0][0] <= t:
            apply(*pop(queue))
        return self._stats(self.events_processed - start)

    def run(self, max_events: Optional[int] = None) -> RunStats:
        """Run until the queue drains (or ``max_events`` have been applied)."""
        queue = self._queue
        pop = heapq.heappop
        apply = self._apply
        start = self.events_processed
        if max_events is None:
            while queue:
                apply(*pop(queue))
        else:
            limit = start + max_events
            while queue and self.events_processed < limit:
                apply(*pop(queue))
        return self._stats(self.events_processed - start)

    def _stats(self, processed: int) -> RunStats:
        names = self.circuit.nets
        per_net = {names[i].name: c for i, c in enumerate(self.transitions) if c}
        return RunStats(processed, self.now, per_net)

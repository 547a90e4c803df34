"""Value change dump output (and a small reader used to validate it)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .kernel import SimTime, Simulator


@dataclass
class Trace:
    """Initial values plus time-ordered changes for a set of nets."""

    scope: str
    nets: list[tuple[str, int]]  # (name, width)
    initial: dict[str, int]
    changes: list[tuple[SimTime, str, int]] = field(default_factory=list)


class TraceRecorder:
    """Probes a set of nets and accumulates a :class:`Trace`."""

    def __init__(self, sim: Simulator, nets=None, until: SimTime | None = None):
        circuit = sim.circuit
        ids = [n.id for n in circuit.nets] if nets is None else list(nets)
        self.sim = sim
        self.until = until
        self.trace = Trace(
            circuit.name,
            [(circuit.nets[i].name, circuit.nets[i].width) for i in ids],
            {circuit.nets[i].name: sim.values[i] for i in ids},
        )
        self._pids = [sim.attach_probe(i, self._observer(circuit.nets[i].name)) for i in ids]

    def _observer(self, name):
        changes = self.trace.changes

        def cb(time, net, value):
            if self.until is None or time <= self.until:
                changes.append((time, name, value))
        return cb

    def detach(self):
        for pid in self._pids:
            self.sim.detach_probe(pid)
        self._pids = []


def _identifier(i: int) -> str:
    chars = [chr(c) for c in range(33, 127)]
    out = ""
    while True:
        i, r = divmod(i, len(chars))
        out = chars[r] + out
        if i == 0:
            return out
        i -= 1


def _value(value: int, width: int, ident: str) -> str:
    if width == 1:
        v = "x" if value not in (0, 1) else str(value)
        return f"{v}{ident}"
    bits = format(value & ((1 << width) - 1), "b")
    return f"b{bits} {ident}"


def write_vcd(trace: Trace, path) -> None:
    if not trace.nets:
        raise ValueError("trace has no nets")
    ids = {name: _identifier(i) for i, (name, _) in enumerate(trace.nets)}
    widths = dict(trace.nets)
    out = [
        "$version asyncfir $end",
        "$timescale 1ps $end",
        f"$scope module {trace.scope} $end",
    ]
    for name, width in trace.nets:
        kind = "wire" if width == 1 else "reg"
        out.append(f"$var {kind} {width} {ids[name]} {name} $end")
    out += ["$upscope $end", "$enddefinitions $end", "$dumpvars"]
    out += [_value(trace.initial[name], widths[name], ids[name]) for name, _ in trace.nets]
    out.append("$end")
    current = None
    for time, name, value in trace.changes:
        if time != current:
            out.append(f"#{time}")
            current = time
        out.append(_value(value, widths[name], ids[name]))
    Path(path).write_text("\n".join(out) + "\n")


def read_vcd(path) -> dict:
    """Parse a VCD written by :func:`write_vcd`.

    Returns ``{"timescale": str, "vars": {name: width},
    "initial": {name: int}, "changes": [(time, name, int)]}``. Raises
    ``ValueError`` on malformed input.
    """
    tokens = Path(path).read_text().split()
    pos = 0
    timescale = None
    vars_, by_id = {}, {}

    def until_end(start):
        end = tokens.index("$end", start)
        return tokens[start:end], end + 1

    while pos < len(tokens):
        tok = tokens[pos]
        if tok == "$timescale":
            body, pos = until_end(pos + 1)
            timescale = "".join(body)
        elif tok == "$var":
            body, pos = until_end(pos + 1)
            if len(body) != 4:
                raise ValueError(f"bad $var: {body}")
            _, width, ident, name = body
            vars_[name] = int(width)
            by_id[ident] = name
        elif tok == "$enddefinitions":
            pos += 2
            break
        elif tok.startswith("$"):
            _, pos = until_end(pos + 1)
        else:
            raise ValueError(f"unexpected token {tok!r} in header")
    if timescale is None:
        raise ValueError("missing $timescale")

    def signed(bits: str, width: int) -> int:
        v = int(bits, 2)
        if width > 1 and v >= 1 << (width - 1):
            v -= 1 << width
        return v

    initial, changes = {}, []
    time = None
    in_dump = False
    while pos < len(tokens):
        tok = tokens[pos]
        pos += 1
        if tok == "$dumpvars":
            in_dump = True
            continue
        if tok == "$end":
            in_dump = False
            continue
        if tok.startswith("#"):
            t = int(tok[1:])
            if time is not None and t < time:
                raise ValueError(f"time goes backwards at #{t}")
            time = t
            continue
        if tok.startswith("b"):
            ident = tokens[pos]
            pos += 1
            name = by_id[ident]
            value = signed(tok[1:], vars_[name])
        else:
            name = by_id[tok[1:]]
            value = int(tok[0]) if tok[0] in "01" else -1
        if in_dump:
            initial[name] = value
        else:
            if time is None:
                raise ValueError("value change before first timestamp")
            changes.append((time, name, value))
    return {"timescale": timescale, "vars": vars_, "initial": initial, "changes": changes}

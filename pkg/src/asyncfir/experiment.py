"""End-to-end experiment runner: simulation, comparison, spectra, latency."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .arch import (
    DelayConfig,
    FilterCircuit,
    RunResult,
    OutputRecorder,
    Variant,
    build,
    inject_sample,
    min_clock_period,
    run_samples,
)
from .dsp import SPECTRUM_MIN_SAMPLES, Coefficients, freq_response, spectrum
from .kernel import SimTime, Simulator
from .monitor import ProtocolViolation, detect_flood, format_violations, monitor_for, snapshot_tokens
from .primitives import accumulator_width
from .signals import SignalFile
from .vcd import TraceRecorder, write_vcd

log = logging.getLogger(__name__)


class IncompleteTrace(ValueError):
    pass


@dataclass
class LatencyReport:
    variant: str
    latencies: list[int]
    measured_mean: float
    async_model: int
    sync_model: int
    stage_delays: list[int]
    control_overhead: int
    clock_period: int
    depth: int

    def to_json(self) -> str:
        d = asdict(self)
        d["samples"] = len(d.pop("latencies"))
        d["latency_min"] = min(self.latencies)
        d["latency_max"] = max(self.latencies)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def _sync_period(fc: FilterCircuit, clock_period: Optional[int]) -> int:
    if fc.clock_period is not None:
        return fc.clock_period
    if clock_period is not None:
        return clock_period
    t = min_clock_period(fc.delays, fc.taps)
    return t + t % 2


def latency_report(fc: FilterCircuit, run: RunResult, clock_period: Optional[int] = None) -> LatencyReport:
    """Per-sample latency from request (or capturing edge) to output valid.

    ``async_model`` is the sum of the data-path stage delays plus the fixed
    control overhead; ``sync_model`` is pipeline depth times the clock period.
    """
    pairs = list(zip(run.input_times, run.output_times))
    if not pairs:
        raise IncompleteTrace("no complete input/output pair in trace")
    lat = [o - i for i, o in pairs]
    period = _sync_period(fc, clock_period)
    depth = 1 + fc.levels
    stages = fc.stage_delays()
    return LatencyReport(
        variant=fc.variant.value,
        latencies=lat,
        measured_mean=float(np.mean(lat)),
        async_model=sum(stages) + fc.control_overhead(),
        sync_model=depth * period,
        stage_delays=stages,
        control_overhead=fc.control_overhead(),
        clock_period=period,
        depth=depth,
    )


@dataclass
class ExperimentConfig:
    coefficients: Coefficients
    signal: SignalFile
    variants: Sequence[Variant] = (Variant.MODIFIED_DFF, Variant.SYNC)
    delays: DelayConfig = field(default_factory=DelayConfig)
    clock_period: Optional[SimTime] = None
    out_dir: Optional[Path] = None
    vcd_samples: int = 0
    max_samples: Optional[int] = None
    sample_driven: bool = True  # async inputs paced at the signal rate


@dataclass
class VariantRun:
    variant: Variant
    outputs: list[int]
    latency: LatencyReport
    violations: list[ProtocolViolation]
    events: int
    vcd_path: Optional[Path] = None


@dataclass
class ExperimentResult:
    runs: dict[Variant, VariantRun]
    mismatches: Optional[int] = None
    files: list[Path] = field(default_factory=list)

    @property
    def verdict(self) -> Optional[str]:
        if self.mismatches is None:
            return None
        return "equal" if self.mismatches == 0 else "mismatch"

    def has_violations(self) -> bool:
        return any(r.violations for r in self.runs.values())


def _run_async(fc, samples, period, vcd_samples):
    sim = Simulator(fc.circuit)
    mon = monitor_for(fc)
    mon.attach(sim, fc)
    rec = OutputRecorder(sim, fc)
    tracer = TraceRecorder(sim) if vcd_samples else None
    sim.run()
    inputs, flood = [], []
    for n, s in enumerate(samples):
        if tracer is not None and n == vcd_samples:
            tracer.detach()
        at = sim.now + 1
        if period:
            at = max(at, n * period)
        before = snapshot_tokens(sim, fc)
        inputs.append(inject_sample(sim, fc, int(s), at))
        sim.run()
        v = detect_flood(before, snapshot_tokens(sim, fc), int(s))
        if v is not None:
            flood.append(v)
    rec.detach()
    if tracer is not None:
        tracer.detach()
    run = RunResult(rec.values, inputs, rec.times)
    violations = sorted(mon.violations + flood, key=lambda v: (v.time, v.stage))
    return run, violations, sim.events_processed, tracer


def _run_sync(fc, samples, vcd_samples):
    sim = Simulator(fc.circuit)
    tracer = None
    if vcd_samples:
        # keep the window in which the first samples enter and leave the pipe
        tracer = TraceRecorder(sim, until=fc.edge_time(fc.next_edge + vcd_samples + fc.depth))
    run = run_samples(fc, samples, sim)
    if tracer is not None:
        tracer.detach()
    return run, [], sim.events_processed, tracer


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    samples = list(cfg.signal.samples)
    if cfg.max_samples is not None:
        samples = samples[: cfg.max_samples]
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    period = int(round(1e12 / cfg.signal.sample_rate)) if cfg.sample_driven else None
    result = ExperimentResult({})
    out_bits = accumulator_width(cfg.signal.resolution, cfg.coefficients.qformat.width, len(cfg.coefficients))

    for variant in cfg.variants:
        fc = build(variant, cfg.coefficients, cfg.delays, cfg.clock_period)
        log.info("simulating %s (%d taps, %d samples)", variant.value, fc.taps, len(samples))
        if variant.is_async:
            run, violations, events, tracer = _run_async(fc, samples, period, cfg.vcd_samples)
        else:
            run, violations, events, tracer = _run_sync(fc, samples, cfg.vcd_samples)
        report = latency_report(fc, run, cfg.clock_period)
        vr = VariantRun(variant, run.outputs, report, violations, events)
        result.runs[variant] = vr
        if out_dir is None:
            continue
        name = variant.value
        files = {
            f"{name}_output.txt": SignalFile(cfg.signal.sample_rate, out_bits, run.outputs).to_text(),
            f"{name}_violations.log": format_violations(violations),
            f"{name}_netlist.txt": fc.netlist(),
            f"{name}_latency.json": report.to_json(),
            f"spectrum_{name}.csv": _spectrum_csv(np.asarray(run.outputs, float) / fc.qformat.scale,
                                                  cfg.signal.sample_rate),
        }
        for fname, text in files.items():
            if text is None:
                continue
            (out_dir / fname).write_text(text)
            result.files.append(out_dir / fname)
        if tracer is not None:
            vr.vcd_path = out_dir / f"{name}.vcd"
            write_vcd(tracer.trace, vr.vcd_path)
            result.files.append(vr.vcd_path)

    a = result.runs.get(Variant.MODIFIED_DFF)
    s = result.runs.get(Variant.SYNC)
    if a is not None and s is not None:
        result.mismatches = sum(1 for x, y in zip(a.outputs, s.outputs) if x != y)
        result.mismatches += abs(len(a.outputs) - len(s.outputs))
        if out_dir is not None:
            (out_dir / "comparison.csv").write_text(comparison_csv(samples, a.outputs, s.outputs))
            (out_dir / "verdict.txt").write_text(f"{result.verdict} mismatches={result.mismatches}\n")
            result.files += [out_dir / "comparison.csv", out_dir / "verdict.txt"]
    if out_dir is not None:
        for fname, text in (("spectrum_input.csv", _spectrum_csv(samples, cfg.signal.sample_rate)),
                            ("response.csv", _response_csv(cfg.coefficients, cfg.signal.sample_rate))):
            if text is not None:
                (out_dir / fname).write_text(text)
                result.files.append(out_dir / fname)
    return result


def comparison_csv(inputs, async_out, sync_out) -> str:
    rows = ["sample_index,input,async_out,sync_out,match"]
    for i, (x, a, s) in enumerate(zip(inputs, async_out, sync_out)):
        rows.append(f"{i},{x},{a},{s},{int(a == s)}")
    return "\n".join(rows) + "\n"


def _spectrum_csv(x, sample_rate) -> Optional[str]:
    if len(x) < SPECTRUM_MIN_SAMPLES:
        log.info("skipping spectrum: only %d samples", len(x))
        return None
    spec = spectrum(x, sample_rate)
    return "freq_hz,magnitude_db\n" + "".join(f"{f:.6f},{m:.6f}\n" for f, m in spec.rows())


def _response_csv(c: Coefficients, sample_rate, points: int = 513) -> str:
    freqs = np.linspace(0, sample_rate / 2, points)
    real = freq_response(c, freqs, sample_rate)
    quant = freq_response(c.quantized_as_real(), freqs, sample_rate)
    rows = ["freq_hz,designed_db,quantized_db"]
    rows += [f"{f:.6f},{a:.6f},{b:.6f}" for f, a, b in zip(freqs, real.magnitude_db, quant.magnitude_db)]
    return "\n".join(rows) + "\n"

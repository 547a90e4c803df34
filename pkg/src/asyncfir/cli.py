"""Command-line entry point: ``asyncfir <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .arch import DelayConfig, Variant
from .dsp import (
    FilterSpec,
    band_performance,
    design_equiripple,
    quantize,
    read_coefficients,
    write_coefficients,
)
from .experiment import ExperimentConfig, _spectrum_csv, run_experiment
from .primitives import QFormat
from .signals import load_signal, synth_ecg, write_signal

log = logging.getLogger("asyncfir")


def _add_delay_args(p):
    g = p.add_argument_group("delays (ps)")
    d = DelayConfig()
    g.add_argument("--c-element", type=int, default=d.c_element)
    g.add_argument("--dff", type=int, default=d.dff)
    g.add_argument("--latch", type=int, default=d.latch)
    g.add_argument("--mult", type=int, default=d.multiplier)
    g.add_argument("--add", type=int, default=d.adder)
    g.add_argument("--margin", type=int, default=d.bundling_margin, help="bundling margin before request")
    g.add_argument("--clock-period", type=int, default=None, help="sync clock period (default: slowest stage)")


def _delays(args) -> DelayConfig:
    return DelayConfig(
        c_element=args.c_element, dff=args.dff, latch=args.latch,
        multiplier=args.mult, adder=args.add, bundling_margin=args.margin,
    )


def cmd_design(args) -> int:
    spec = FilterSpec(args.fs, args.fpass, args.fstop, args.ripple, args.atten, args.order)
    coeffs = quantize(design_equiripple(spec), QFormat.parse(args.format))
    write_coefficients(coeffs, args.out)
    real = band_performance(coeffs, spec)
    quant = band_performance(coeffs.quantized_as_real(), spec)
    print(f"taps={len(coeffs)} converged={coeffs.converged} iterations={coeffs.iterations}")
    print(f"achieved stopband attenuation: {real['stopband_atten_db']:.2f} dB "
          f"(target {spec.stopband_atten_db:g} dB), quantized {quant['stopband_atten_db']:.2f} dB")
    print(f"passband ripple: {real['passband_ripple_db']:.3f} dB (target {spec.passband_ripple_db:g} dB)")
    return 0


def cmd_synth(args) -> int:
    sig = synth_ecg(args.duration, args.rate, args.noise, args.seed)
    write_signal(sig, args.out)
    print(f"wrote {len(sig)} samples at {args.rate:g} Hz to {args.out}")
    return 0


def _experiment(args, variants) -> int:
    cfg = ExperimentConfig(
        coefficients=read_coefficients(args.coeffs),
        signal=load_signal(args.signal),
        variants=variants,
        delays=_delays(args),
        clock_period=args.clock_period,
        out_dir=Path(args.out_dir),
        vcd_samples=args.vcd_samples,
        max_samples=args.max_samples,
    )
    res = run_experiment(cfg)
    bad = False
    for v, run in res.runs.items():
        lat = run.latency
        print(f"{v.value}: {len(run.outputs)} outputs, {len(run.violations)} violations, "
              f"latency {lat.measured_mean:.0f} ps (async model {lat.async_model}, sync model {lat.sync_model})")
        bad |= bool(run.violations)
    if res.verdict is not None:
        print(f"comparison: {res.verdict} ({res.mismatches} mismatches)")
        bad |= res.mismatches != 0
    return 1 if (args.strict and bad) else 0


def cmd_simulate(args) -> int:
    return _experiment(args, [Variant(args.variant)])


def cmd_compare(args) -> int:
    return _experiment(args, [Variant.MODIFIED_DFF, Variant.SYNC])


def cmd_spectrum(args) -> int:
    sig = load_signal(args.signal)
    text = _spectrum_csv(sig.samples, sig.sample_rate)
    if text is None:
        print(f"error: {args.signal} is too short for a spectrum", file=sys.stderr)
        return 2
    Path(args.out).write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asyncfir", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design equiripple coefficients")
    p.add_argument("--out", required=True)
    p.add_argument("--fs", type=float, default=125.0)
    p.add_argument("--fpass", type=float, default=35.0)
    p.add_argument("--fstop", type=float, default=45.0)
    p.add_argument("--ripple", type=float, default=1.0, help="passband ripple, dB")
    p.add_argument("--atten", type=float, default=80.0, help="stopband attenuation, dB")
    p.add_argument("--order", type=int, default=32)
    p.add_argument("--format", default="Q1.15")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("synth-ecg", help="write a synthetic noisy ECG signal file")
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float, default=80.0)
    p.add_argument("--rate", type=float, default=125.0)
    p.add_argument("--noise", type=float, default=200.0, help="noise amplitude, LSB")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    for name, func, helptext in (("simulate", cmd_simulate, "simulate one variant"),
                                 ("compare", cmd_compare, "modified async vs sync comparison")):
        p = sub.add_parser(name, help=helptext)
        if name == "simulate":
            p.add_argument("--variant", choices=[v.value for v in Variant], default="modified-dff")
        p.add_argument("--coeffs", required=True)
        p.add_argument("--signal", required=True)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--vcd-samples", type=int, default=0, help="record a VCD over the first N samples")
        p.add_argument("--max-samples", type=int, default=None)
        p.add_argument("--strict", action="store_true", help="exit 1 on any violation or mismatch")
        _add_delay_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("spectrum", help="Hann-windowed spectrum of a signal file as CSV")
    p.add_argument("--signal", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

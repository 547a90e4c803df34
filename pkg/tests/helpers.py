"""Oracles and harness pieces shared by the unit and acceptance tests."""

import hashlib

import numpy as np
import pytest

from asyncfir.arch import run_samples
from asyncfir.cli import main
from asyncfir.dsp import design_weights
from asyncfir.kernel import Simulator
from asyncfir.monitor import Signal, TraceTap, monitor_for

REQ, ACK, G = Signal.REQ, Signal.ACK, Signal.GLOBAL_REQ

# acceptance lines, echoed again in the terminal summary
CRITERIA: list[str] = []


def lp_minimax(spec, density=16):
    """Independent oracle: weighted minimax type-I design as a linear program."""
    cp = pytest.importorskip("cvxpy")
    fs = spec.sample_rate
    m = spec.order // 2
    n = density * (m + 1)
    g = np.concatenate([np.linspace(0, spec.passband_edge / fs, n),
                        np.linspace(spec.stopband_edge / fs, 0.5, n)])
    d = (g <= spec.passband_edge / fs).astype(float)
    w = np.where(d > 0, 1.0, design_weights(spec)[1])
    basis = np.cos(2 * np.pi * np.outer(g, np.arange(m + 1)))
    a, e = cp.Variable(m + 1), cp.Variable()
    cp.Problem(cp.Minimize(e), [cp.multiply(w, basis @ a - d) <= e,
                                cp.multiply(w, d - basis @ a) <= e]).solve()
    a = np.asarray(a.value)
    h = np.concatenate([a[:0:-1] / 2, [a[0]], a[1:] / 2])
    return h, float(e.value)


def alternations(coeffs, spec, density=16):
    # oracle-side extremum count, independent of the designer's own bookkeeping
    fs = spec.sample_rate
    n = density * 17  # 16 points per extremal interval
    g = np.concatenate([np.linspace(0, spec.passband_edge, n), np.linspace(spec.stopband_edge, fs / 2, n)])
    k = np.arange(-16, 17)
    amp = np.cos(2 * np.pi * np.outer(g / fs, k)) @ coeffs.taps
    d = (g <= spec.passband_edge).astype(float)
    w = np.where(d > 0, 1.0, design_weights(spec)[1])
    err = w * (amp - d)
    peak = np.abs(err).max()
    count, last = 0, 0
    for i in range(len(err)):
        band_edge = i in (0, n - 1, n, 2 * n - 1)
        local = band_edge or (abs(err[i]) >= abs(err[i - 1]) and abs(err[i]) >= abs(err[i + 1]))
        if local and abs(err[i]) > 0.95 * peak:
            s = int(np.sign(err[i]))
            if s != last:
                count, last = count + 1, s
    return count


def record_legal_trace(fc, samples):
    sim = Simulator(fc.circuit)
    mon = monitor_for(fc)
    mon.attach(sim, fc)
    tap = TraceTap(sim, fc)
    run_samples(fc, samples, sim)
    tap.detach()
    return tap.events, mon.violations


def reorder_one(events, channel, rng):
    """Swap two adjacent transitions of one channel's req/ack/greq projection."""
    proj = [i for i, (_, st, sig, _) in enumerate(events)
            if (st == channel and sig in (REQ, ACK)) or sig is G]
    pairs = [(a, b) for a, b in zip(proj, proj[1:]) if events[a][2:] != events[b][2:]]
    a, b = rng.choice(pairs)
    out = list(events)
    (ta, sa, ga, va), (tb, sb, gb, vb) = events[a], events[b]
    out[a], out[b] = (ta, sb, gb, vb), (tb, sa, ga, va)
    return out


def hash_dir(d):
    return {str(p.relative_to(d)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(d.rglob("*")) if p.is_file()}


def cli_session(root):
    root.mkdir()
    c, s, sp = root / "c.txt", root / "s.txt", root / "spec.csv"
    assert main(["design", "--out", str(c)]) == 0
    assert main(["synth-ecg", "--out", str(s), "--duration", "2", "--seed", "7"]) == 0
    assert main(["spectrum", "--signal", str(s), "--out", str(sp)]) == 0
    assert main(["compare", "--coeffs", str(c), "--signal", str(s), "--out-dir", str(root / "cmp"),
                 "--vcd-samples", "2", "--strict"]) == 0
    rc = main(["simulate", "--variant", "original", "--coeffs", str(c), "--signal", str(s),
               "--out-dir", str(root / "orig"), "--max-samples", "3", "--strict"])
    assert rc == 1
    return hash_dir(root)



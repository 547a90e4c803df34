"""Signal files and the synthetic ECG generator.

File format: three header lines ``rate=``, ``bits=``, ``count=`` followed by
one signed integer per line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


class ResolutionViolation(ValueError):
    pass


@dataclass
class SignalFile:
    sample_rate: float
    resolution: int
    samples: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.samples = [int(s) for s in self.samples]
        lo, hi = -(1 << (self.resolution - 1)), (1 << (self.resolution - 1)) - 1
        for i, s in enumerate(self.samples):
            if not lo <= s <= hi:
                raise ResolutionViolation(f"sample {i} = {s} outside {self.resolution}-bit range")

    def __len__(self):
        return len(self.samples)

    def to_text(self) -> str:
        head = f"rate={_fmt_rate(self.sample_rate)}\nbits={self.resolution}\ncount={len(self.samples)}\n"
        return head + "".join(f"{s}\n" for s in self.samples)


def _fmt_rate(rate: float) -> str:
    return str(int(rate)) if float(rate).is_integer() else repr(float(rate))


def write_signal(sig: SignalFile, path) -> None:
    Path(path).write_text(sig.to_text())


def load_signal(path) -> SignalFile:
    lines = Path(path).read_text().splitlines()
    header = {}
    for lineno, key in enumerate(("rate", "bits", "count"), 1):
        if lineno > len(lines):
            raise ParseError(path, lineno, f"missing '{key}=' header")
        name, sep, val = lines[lineno - 1].partition("=")
        if not sep or name.strip() != key:
            raise ParseError(path, lineno, f"expected '{key}=<value>'")
        try:
            header[key] = float(val) if key == "rate" else int(val)
        except ValueError:
            raise ParseError(path, lineno, f"bad {key} value {val!r}") from None
    samples = []
    for lineno, line in enumerate(lines[3:], 4):
        try:
            samples.append(int(line))
        except ValueError:
            raise ParseError(path, lineno, f"not an integer: {line!r}") from None
    if header["count"] != len(samples):
        raise ParseError(path, 3, f"count={header['count']} but {len(samples)} samples follow")
    return SignalFile(header["rate"], header["bits"], samples)


def _beat(t):
    # P, Q, R, S, T waves as gaussians: (amplitude, centre s, width s)
    waves = ((0.12, -0.20, 0.025), (-0.12, -0.035, 0.010), (1.0, 0.0, 0.012),
             (-0.25, 0.035, 0.010), (0.30, 0.28, 0.040))
    return sum(a * np.exp(-0.5 * ((t - c) / w) ** 2) for a, c, w in waves)


def synth_ecg(
    duration_s: float = 80.0,
    sample_rate: float = 125.0,
    noise_amplitude: float = 200.0,
    seed: int = 0,
    heart_rate_bpm: float = 72.0,
    peak: float = 800.0,
    bits: int = 12,
) -> SignalFile:
    """Quantized synthetic ECG with seeded interference above 45 Hz.

    The clean part is a periodic PQRST pulse train whose energy sits well
    below 35 Hz. ``noise_amplitude`` (in LSB) scales a 50 Hz mains tone of
    that amplitude plus random-phase broadband noise (half that RMS) spread
    over the bins from 46 Hz to Nyquist.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    rr = 60.0 / heart_rate_bpm
    phase = (t + rr / 2) % rr - rr / 2
    clean = peak * _beat(phase)

    rng = np.random.default_rng(seed)
    noise = np.zeros(n)
    if noise_amplitude > 0:
        freqs = np.fft.rfftfreq(n, 1 / sample_rate)
        band = freqs > 46.0
        spec = np.zeros(len(freqs), complex)
        spec[band] = np.exp(2j * np.pi * rng.random(band.sum()))
        broad = np.fft.irfft(spec, n)
        rms = np.sqrt(np.mean(broad ** 2))
        if rms > 0:
            broad /= rms
        hum = np.sqrt(2) * np.sin(2 * np.pi * 50.0 * t + 2 * np.pi * rng.random())
        noise = noise_amplitude * (hum / np.sqrt(2) + 0.5 * broad)

    lim = 1 << (bits - 1)
    x = np.clip(np.round(clean + noise), -lim, lim - 1).astype(int)
    return SignalFile(sample_rate, bits, x.tolist())

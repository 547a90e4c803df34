"""Filter mathematics: equiripple design, responses, golden FIR models."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .primitives import COEFF_FORMAT, QFormat

log = logging.getLogger(__name__)

DB_FLOOR = -300.0
SPECTRUM_MIN_SAMPLES = 16


class NoConvergence(RuntimeError):
    def __init__(self, message, coefficients=None):
        super().__init__(message)
        self.coefficients = coefficients


class QuantizationOverflow(OverflowError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    sample_rate: float = 125.0
    passband_edge: float = 35.0
    stopband_edge: float = 45.0
    passband_ripple_db: float = 1.0
    stopband_atten_db: float = 80.0
    order: int = 32

    def __post_init__(self):
        if not 0 < self.passband_edge < self.stopband_edge < self.sample_rate / 2:
            raise ValueError("band edges must satisfy 0 < fpass < fstop < fs/2")
        if self.passband_ripple_db <= 0 or self.stopband_atten_db <= 0:
            raise ValueError("ripple and attenuation must be positive")
        if self.order < 2 or self.order % 2:
            raise ValueError("order must be even and >= 2 (type I linear phase)")

    @property
    def taps(self) -> int:
        return self.order + 1

    def deviations(self) -> tuple[float, float]:
        """Linear passband and stopband deviations implied by the dB figures."""
        g = 10 ** (self.passband_ripple_db / 20)
        dp = (g - 1) / (g + 1)
        ds = 10 ** (-self.stopband_atten_db / 20)
        return dp, ds


@dataclass
class Coefficients:
    taps: np.ndarray
    qformat: Optional[QFormat] = None
    quantized: Optional[list[int]] = None
    max_quant_error: Optional[float] = None
    # designer diagnostics
    iterations: int = 0
    converged: bool = True
    weighted_error: float = float("nan")
    extremal_freqs: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=float)

    def __len__(self):
        return len(self.taps)

    @property
    def order(self) -> int:
        return len(self.taps) - 1

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.taps, self.taps[::-1]))

    def quantized_as_real(self) -> np.ndarray:
        if self.quantized is None:
            raise ValueError("coefficients are not quantized")
        return np.asarray(self.quantized, dtype=float) / self.qformat.scale


@dataclass
class FrequencyResponse:
    freqs: np.ndarray
    magnitude_db: np.ndarray

    def at(self, f: float) -> float:
        i = int(np.argmin(np.abs(self.freqs - f)))
        return float(self.magnitude_db[i])

    def rows(self):
        return zip(self.freqs.tolist(), self.magnitude_db.tolist())


# --- Remez exchange -------------------------------------------------------------


def _bary_weights(x: np.ndarray) -> np.ndarray:
    # Product over pairwise differences, scaled to avoid under/overflow for
    # moderate set sizes.
    n = len(x)
    w = np.empty(n)
    c = 2.0 / (x.max() - x.min()) if n > 1 else 1.0
    for k in range(n):
        d = c * (x[k] - np.delete(x, k))
        w[k] = 1.0 / np.prod(d)
    return w


def _bary_eval(xk, yk, wk, x):
    diff = x[:, None] - xk[None, :]
    exact = np.isclose(diff, 0.0, rtol=0, atol=1e-15)
    diff[exact] = 1.0
    t = wk / diff
    out = (t @ yk) / t.sum(axis=1)
    rows, cols = np.nonzero(exact)
    out[rows] = yk[cols]
    return out


def _band_grid(bands, numtaps_half, density):
    """Dense frequency grid (cycles/sample) covering the bands."""
    spacing = 0.5 / (density * numtaps_half)
    grid, band_id = [], []
    for b, (lo, hi) in enumerate(bands):
        n = max(int(math.ceil((hi - lo) / spacing)) + 1, 2)
        pts = np.linspace(lo, hi, n)
        grid.append(pts)
        band_id.append(np.full(n, b))
    return np.concatenate(grid), np.concatenate(band_id)


def _local_extrema(err, band_id):
    """Indices of local maxima of |err| within each band; band edges always count."""
    mag = np.abs(err)
    n = len(err)
    idx = []
    for i in range(n):
        left_same = i > 0 and band_id[i - 1] == band_id[i]
        right_same = i < n - 1 and band_id[i + 1] == band_id[i]
        if not (left_same and right_same):
            idx.append(i)
        elif mag[i] >= mag[i - 1] and mag[i] > mag[i + 1]:
            idx.append(i)
    return np.array(idx, dtype=int)


def _alternate(idx, err):
    """Collapse runs of equal-sign extrema to their largest member."""
    out = []
    for i in idx:
        if out and np.sign(err[i]) == np.sign(err[out[-1]]):
            if abs(err[i]) > abs(err[out[-1]]):
                out[-1] = i
        else:
            out.append(i)
    return out


def remez_exchange(
    numtaps: int,
    bands: Sequence[tuple[float, float]],
    desired: Sequence[float],
    weight: Sequence[float],
    grid_density: int = 16,
    maxiter: int = 40,
    tol: float = 1e-6,
    strict: bool = False,
) -> Coefficients:
    """Type-I linear-phase minimax FIR by the Remez exchange algorithm.

    ``bands`` are (low, high) edges in cycles/sample within [0, 0.5],
    ``desired`` is the piecewise-constant target amplitude per band and
    ``weight`` the error weight per band. Converges when the relative spread of
    the extremal errors drops below ``tol``; otherwise the last iterate is
    returned with ``converged=False`` (or :class:`NoConvergence` is raised if
    ``strict``).
    """
    if numtaps < 3 or numtaps % 2 == 0:
        raise ValueError("numtaps must be odd and >= 3")
    m = (numtaps - 1) // 2  # cosine terms 0..m
    r = m + 1  # unknown coefficients
    grid, band_id = _band_grid(bands, r, grid_density)
    des = np.asarray(desired, float)[band_id]
    wt = np.asarray(weight, float)[band_id]
    if np.any(wt <= 0):
        raise ValueError("band weights must be positive")
    x = np.cos(2 * np.pi * grid)

    ext = np.round(np.linspace(0, len(grid) - 1, r + 1)).astype(int)
    converged = False
    it = 0
    for it in range(1, maxiter + 1):
        xk = x[ext]
        bw = _bary_weights(xk)
        signs = (-1.0) ** np.arange(r + 1)
        delta = np.dot(bw, des[ext]) / np.dot(bw, signs / wt[ext])
        yk = des[ext] - signs * delta / wt[ext]
        # interpolate through r of the r+1 points
        amp = _bary_eval(xk[:-1], yk[:-1], _bary_weights(xk[:-1]), x)
        err = wt * (des - amp)

        cand = _alternate(_local_extrema(err, band_id), err)
        cand = [i for i in cand if abs(err[i]) >= abs(delta) * (1 - 1e-9)] or cand
        cand = _alternate(cand, err)
        while len(cand) > r + 1:
            if abs(err[cand[0]]) < abs(err[cand[-1]]):
                cand.pop(0)
            else:
                cand.pop()
        if len(cand) < r + 1:
            log.debug("remez: only %d extremal candidates at iteration %d", len(cand), it)
            break
        new_ext = np.array(cand)
        ext_err = np.abs(err[new_ext])
        spread = (ext_err.max() - ext_err.min()) / ext_err.max()
        ext = new_ext
        if spread < tol:
            converged = True
            break

    # final interpolant through the last extremal set
    xk = x[ext]
    bw = _bary_weights(xk)
    signs = (-1.0) ** np.arange(r + 1)
    delta = np.dot(bw, des[ext]) / np.dot(bw, signs / wt[ext])
    yk = des[ext] - signs * delta / wt[ext]
    bw_r = _bary_weights(xk[:-1])

    # sample the amplitude on m+1 uniformly spaced frequencies and invert the
    # cosine series A(w) = sum_k a_k cos(k w)
    wk = np.pi * np.arange(r) / m
    amp_k = _bary_eval(xk[:-1], yk[:-1], bw_r, np.cos(wk))
    basis = np.cos(np.outer(wk, np.arange(r)))
    a = np.linalg.solve(basis, amp_k)
    h = np.empty(numtaps)
    h[m] = a[0]
    h[m + 1:] = a[1:] / 2
    h[:m] = h[m + 1:][::-1]

    amp = _bary_eval(xk[:-1], yk[:-1], bw_r, x)
    weighted = float(np.max(np.abs(wt * (des - amp))))
    coeffs = Coefficients(
        h,
        iterations=it,
        converged=converged,
        weighted_error=weighted,
        extremal_freqs=grid[ext],
    )
    if not converged:
        msg = f"remez did not converge in {it} iterations"
        if strict:
            raise NoConvergence(msg, coeffs)
        log.warning(msg)
    return coeffs


def design_weights(spec: FilterSpec) -> tuple[float, float]:
    dp, ds = spec.deviations()
    return 1.0, dp / ds


def design_equiripple(spec: FilterSpec, grid_density: int = 16) -> Coefficients:
    fs = spec.sample_rate
    bands = [(0.0, spec.passband_edge / fs), (spec.stopband_edge / fs, 0.5)]
    return remez_exchange(spec.taps, bands, [1.0, 0.0], design_weights(spec), grid_density)


def band_performance(c: Coefficients | np.ndarray, spec: FilterSpec, points: int = 4096) -> dict:
    """Achieved passband ripple (dB, peak-to-peak) and stopband attenuation (dB)."""
    taps = c.taps if isinstance(c, Coefficients) else np.asarray(c, float)
    fs = spec.sample_rate
    fp = np.linspace(0, spec.passband_edge, points)
    fstop = np.linspace(spec.stopband_edge, fs / 2, points)
    hp = np.abs(_dtft(taps, fp / fs))
    hs = np.abs(_dtft(taps, fstop / fs))
    return {
        "passband_ripple_db": float(20 * np.log10(hp.max() / hp.min())),
        "stopband_atten_db": float(-20 * np.log10(hs.max())),
    }


# --- responses -------------------------------------------------------------------


def _dtft(taps, f_norm):
    k = np.arange(len(taps))
    return np.exp(-2j * np.pi * np.outer(f_norm, k)) @ taps


def to_db(mag: np.ndarray) -> np.ndarray:
    mag = np.asarray(mag, float)
    out = np.full(mag.shape, DB_FLOOR, dtype=float)
    nz = mag > 0
    out[nz] = np.maximum(20 * np.log10(mag[nz]), DB_FLOOR)
    return out


def freq_response(c: Coefficients | Sequence[float], freqs, sample_rate: float) -> FrequencyResponse:
    taps = c.taps if isinstance(c, Coefficients) else np.asarray(c, float)
    freqs = np.asarray(freqs, float)
    if np.any(freqs < 0) or np.any(freqs > sample_rate / 2):
        raise ValueError("frequencies must lie in [0, fs/2]")
    return FrequencyResponse(freqs, to_db(np.abs(_dtft(taps, freqs / sample_rate))))


def spectrum(x: Sequence[float], sample_rate: float) -> FrequencyResponse:
    """Hann-windowed magnitude spectrum, amplitude-normalised to the window sum."""
    x = np.asarray(x, float)
    if len(x) < SPECTRUM_MIN_SAMPLES:
        raise ValueError(f"spectrum needs at least {SPECTRUM_MIN_SAMPLES} samples")
    w = np.hanning(len(x))
    mag = np.abs(np.fft.rfft(x * w)) * 2 / w.sum()
    freqs = np.fft.rfftfreq(len(x), 1 / sample_rate)
    return FrequencyResponse(freqs, to_db(mag))


# --- quantization and golden models --------------------------------------------


def quantize(c: Coefficients, fmt: QFormat = COEFF_FORMAT) -> Coefficients:
    """Round-to-nearest-even into ``fmt``; records the max quantization error."""
    scaled = np.round(c.taps * fmt.scale)  # numpy rounds half to even
    lo, hi = -(1 << (fmt.width - 1)), (1 << (fmt.width - 1)) - 1
    if scaled.min() < lo or scaled.max() > hi:
        raise QuantizationOverflow(f"coefficients exceed {fmt} range")
    q = [int(v) for v in scaled]
    err = float(np.max(np.abs(c.taps - scaled / fmt.scale))) if len(q) else 0.0
    return Coefficients(
        c.taps.copy(),
        qformat=fmt,
        quantized=q,
        max_quant_error=err,
        iterations=c.iterations,
        converged=c.converged,
        weighted_error=c.weighted_error,
        extremal_freqs=c.extremal_freqs,
    )


def golden_fir(c: Coefficients, x: Sequence, arithmetic: str = "real"):
    """Direct-form convolution with a zero-filled delay line; one output per input.

    ``arithmetic="fixed"`` uses the quantized integer taps and returns exact
    Python ints (the full-precision accumulator word).
    """
    if arithmetic == "real":
        x = np.asarray(x, float)
        return np.convolve(x, c.taps)[: len(x)]
    if arithmetic != "fixed":
        raise ValueError(f"unknown arithmetic {arithmetic!r}")
    if c.quantized is None:
        raise ValueError("fixed-point golden model needs quantized coefficients")
    xi = np.asarray(x, dtype=np.int64)
    qi = np.asarray(c.quantized, dtype=np.int64)
    # 12-bit samples x 16-bit taps x 33 taps stays far below int64 range
    if xi.size and (int(np.abs(xi).max()) * int(np.abs(qi).sum()) >= 2**62):
        out = [0] * len(xi)
        for n in range(len(xi)):
            out[n] = sum(int(qi[k]) * int(xi[n - k]) for k in range(len(qi)) if n - k >= 0)
        return out
    return [int(v) for v in np.convolve(xi, qi)[: len(xi)]]


# --- coefficient file ----------------------------------------------------------


def write_coefficients(c: Coefficients, path) -> None:
    if c.quantized is None:
        raise ValueError("write quantized coefficients")
    lines = [f"# format={c.qformat}", f"# taps={len(c)}"]
    lines += [f"{float(t)!r} {q}" for t, q in zip(c.taps, c.quantized)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_coefficients(path) -> Coefficients:
    fmt, count, taps, q = None, None, [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "format":
                fmt = QFormat.parse(val)
            elif key.strip() == "taps":
                count = int(val)
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected '<real> <int>'")
        taps.append(float(parts[0]))
        q.append(int(parts[1]))
    if fmt is None:
        raise ValueError(f"{path}: missing '# format=' header")
    if count is not None and count != len(taps):
        raise ValueError(f"{path}: header says {count} taps, found {len(taps)}")
    return Coefficients(np.array(taps), qformat=fmt, quantized=q)

import math
import random

import numpy as np
import pytest
import scipy.signal

from asyncfir.dsp import (
    Coefficients,
    FilterSpec,
    NoConvergence,
    QuantizationOverflow,
    band_performance,
    design_equiripple,
    design_weights,
    freq_response,
    golden_fir,
    quantize,
    read_coefficients,
    remez_exchange,
    spectrum,
    write_coefficients,
)
from asyncfir.primitives import QFormat

from helpers import alternations, lp_minimax


def test_filter_spec_defaults_and_validation():
    s = FilterSpec()
    assert (s.sample_rate, s.passband_edge, s.stopband_edge, s.order, s.taps) == (125, 35, 45, 32, 33)
    with pytest.raises(ValueError):
        FilterSpec(passband_edge=50, stopband_edge=45)
    with pytest.raises(ValueError):
        FilterSpec(stopband_edge=70)


def test_design_is_symmetric_and_converges(coeffs):
    assert len(coeffs) == 33
    assert coeffs.converged
    assert coeffs.is_symmetric()
    assert coeffs.quantized == coeffs.quantized[::-1]


def test_matches_scipy_remez(spec, coeffs):
    fs = spec.sample_rate
    ref = scipy.signal.remez(33, [0, 35, 45, fs / 2], [1, 0], weight=design_weights(spec), fs=fs)
    assert np.max(np.abs(ref - coeffs.taps)) < 1e-4
    ours = band_performance(coeffs, spec)["stopband_atten_db"]
    theirs = band_performance(ref, spec)["stopband_atten_db"]
    assert abs(ours - theirs) < 0.5


def test_matches_lp_oracle(spec, coeffs):
    h, err = lp_minimax(spec)
    assert coeffs.weighted_error == pytest.approx(err, rel=0.02)
    f = np.linspace(0, spec.passband_edge, 16 * 17)
    ours, ref = freq_response(coeffs, f, 125).magnitude_db, freq_response(h, f, 125).magnitude_db
    assert np.max(np.abs(ours - ref)) < 0.5


def test_alternation_count(spec, coeffs):
    # a type-I order-32 minimax solution alternates at least m + 2 = 18 times
    assert alternations(coeffs, spec) >= 18


def test_extremal_set_size(coeffs):
    assert len(coeffs.extremal_freqs) == 18


def test_attenuation_monotone_in_order():
    atten = [band_performance(design_equiripple(FilterSpec(order=n)), FilterSpec(order=n))["stopband_atten_db"]
             for n in (16, 24, 32, 40)]
    assert atten == sorted(atten)
    # frozen regression values (dB), computed once from this designer
    assert atten == pytest.approx([63.4, 71.0, 80.5, 89.7], abs=0.2)


def test_linear_phase_group_delay(coeffs):
    w, gd = scipy.signal.group_delay((coeffs.taps, [1.0]), w=np.linspace(0.05, 1.5, 20))
    assert np.allclose(gd, 16, atol=1e-6)


def test_strict_nonconvergence_raises():
    with pytest.raises(NoConvergence) as exc:
        remez_exchange(33, [(0, 0.28), (0.36, 0.5)], [1, 0], [1, 575], maxiter=1, strict=True)
    assert exc.value.coefficients is not None


def test_remez_validates_arguments():
    with pytest.raises(ValueError):
        remez_exchange(32, [(0, 0.2), (0.3, 0.5)], [1, 0], [1, 1])
    with pytest.raises(ValueError):
        remez_exchange(33, [(0, 0.2), (0.3, 0.5)], [1, 0], [1, 0])


def test_quantize_rounding_and_overflow():
    q = quantize(Coefficients([0.5, -0.25, 1 / 65536, 3 / 65536]))
    assert q.quantized == [16384, -8192, 0, 2]  # half-even: 0.5 -> 0, 1.5 -> 2
    assert q.max_quant_error == pytest.approx(1 / 65536)
    with pytest.raises(QuantizationOverflow):
        quantize(Coefficients([1.0]))
    assert quantize(Coefficients([-1.0])).quantized == [-32768]


def test_quantized_attenuation_reported(spec, coeffs):
    real = band_performance(coeffs, spec)["stopband_atten_db"]
    quant = band_performance(coeffs.quantized_as_real(), spec)["stopband_atten_db"]
    assert real > 80.0
    assert 70.0 < quant < real


def test_golden_real_matches_direct_convolution(coeffs):
    rng = np.random.default_rng(3)
    x = rng.normal(size=300)
    y = golden_fir(coeffs, x)
    h = coeffs.taps
    direct = [sum(h[k] * x[n - k] for k in range(len(h)) if n - k >= 0) for n in range(len(x))]
    np.testing.assert_allclose(y, direct, rtol=1e-12, atol=1e-12 * np.max(np.abs(direct)))


def test_golden_fixed_matches_bigint_oracle(coeffs):
    rng = random.Random(5)
    x = [rng.randrange(-2048, 2048) for _ in range(400)]
    q = coeffs.quantized
    oracle = [sum(q[k] * x[n - k] for k in range(33) if n >= k) for n in range(len(x))]
    assert golden_fir(coeffs, x, "fixed") == oracle


def test_golden_zero_filled_start(coeffs):
    y = golden_fir(coeffs, [1] + [0] * 40, "fixed")
    assert y[:33] == coeffs.quantized
    assert y[33:] == [0] * 8


def test_coefficient_file_round_trip(tmp_path, coeffs):
    p = tmp_path / "c.txt"
    write_coefficients(coeffs, p)
    text = p.read_text()
    assert text.startswith("# format=Q1.15\n# taps=33\n")
    back = read_coefficients(p)
    assert back.quantized == coeffs.quantized
    assert np.array_equal(back.taps, coeffs.taps)
    assert back.qformat == QFormat(1, 15)


def test_freq_response_range_check(coeffs):
    with pytest.raises(ValueError):
        freq_response(coeffs, [70.0], 125)
    r = freq_response(coeffs, [0.0, 50.0], 125)
    assert abs(r.at(0.0)) < 1.0
    assert r.at(50.0) < -75


def test_spectrum_of_tone():
    fs, n = 125.0, 10000
    t = np.arange(n) / fs
    s = spectrum(100 * np.sin(2 * np.pi * 50 * t), fs)
    assert s.at(50.0) == pytest.approx(20 * math.log10(100), abs=0.01)
    with pytest.raises(ValueError):
        spectrum([1, 2, 3], fs)

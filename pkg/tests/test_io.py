
import pytest

from asyncfir.arch import RunResult, Variant, build
from asyncfir.cli import main
from asyncfir.dsp import spectrum
from asyncfir.experiment import ExperimentConfig, IncompleteTrace, latency_report, run_experiment
from asyncfir.signals import ParseError, ResolutionViolation, SignalFile, load_signal, synth_ecg, write_signal
from asyncfir.vcd import Trace, read_vcd, write_vcd

from helpers import cli_session


def test_load_small_signal(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("rate=125\nbits=12\ncount=3\n1\n-2\n3\n")
    sig = load_signal(p)
    assert (sig.sample_rate, sig.resolution, sig.samples) == (125.0, 12, [1, -2, 3])


@pytest.mark.parametrize("text, lineno", [
    ("rate=125\nbits=12\n", 3),
    ("rate=125\nbitz=12\ncount=0\n", 2),
    ("rate=125\nbits=12\ncount=2\n1\nx\n", 5),
    ("rate=125\nbits=12\ncount=3\n1\n2\n", 3),
])
def test_parse_errors_carry_line_numbers(tmp_path, text, lineno):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as exc:
        load_signal(p)
    assert exc.value.lineno == lineno


def test_resolution_violation(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("rate=125\nbits=12\ncount=1\n2048\n")
    with pytest.raises(ResolutionViolation):
        load_signal(p)


def test_synth_defaults_and_round_trip(tmp_path):
    sig = synth_ecg()
    assert len(sig) == 10000 and sig.sample_rate == 125 and sig.resolution == 12
    assert sig.samples == synth_ecg().samples
    assert sig.samples != synth_ecg(seed=1).samples
    p = tmp_path / "ecg.txt"
    write_signal(sig, p)
    q = tmp_path / "ecg2.txt"
    write_signal(load_signal(p), q)
    assert p.read_bytes() == q.read_bytes()


def test_clean_ecg_energy_below_passband():
    sig = synth_ecg(noise_amplitude=0)
    s = spectrum(sig.samples, sig.sample_rate)
    power = 10 ** (s.magnitude_db / 10)
    assert power[s.freqs < 35].sum() / power.sum() > 0.999
    with pytest.raises(ValueError):
        synth_ecg(duration_s=0)


def test_vcd_two_transitions(tmp_path):
    t = Trace("top", [("a", 1)], {"a": 0}, [(10, "a", 1), (20, "a", 0)])
    p = tmp_path / "t.vcd"
    write_vcd(t, p)
    text = p.read_text()
    assert "$timescale 1ps $end" in text
    body = text.split("$dumpvars")[1].split("$end", 1)[1].split()
    assert body == ["#10", "1!", "#20", "0!"]
    parsed = read_vcd(p)
    assert parsed["changes"] == [(10, "a", 1), (20, "a", 0)]
    with pytest.raises(ValueError):
        write_vcd(Trace("top", [], {}), tmp_path / "e.vcd")


def test_vcd_multibit_signed(tmp_path):
    t = Trace("top", [("w", 8)], {"w": -3}, [(1, "w", 100)])
    write_vcd(t, tmp_path / "w.vcd")
    parsed = read_vcd(tmp_path / "w.vcd")
    assert parsed["initial"] == {"w": -3}
    assert parsed["changes"] == [(1, "w", 100)]


def test_latency_report_needs_a_pair(small_coeffs):
    fc = build(Variant.MODIFIED_DFF, small_coeffs)
    with pytest.raises(IncompleteTrace):
        latency_report(fc, RunResult([], [], []))


def test_experiment_outputs_and_vcd_reparse(tmp_path, coeffs):
    sig = synth_ecg(duration_s=1)
    cfg = ExperimentConfig(coeffs, sig, out_dir=tmp_path, vcd_samples=2)
    res = run_experiment(cfg)
    assert res.verdict == "equal" and not res.has_violations()
    rows = (tmp_path / "comparison.csv").read_text().splitlines()
    assert rows[0] == "sample_index,input,async_out,sync_out,match"
    assert len(rows) == 1 + len(sig)
    for name in ("modified-dff", "sync"):
        parsed = read_vcd(tmp_path / f"{name}.vcd")
        assert parsed["timescale"] == "1ps"
        times = [t for t, _, _ in parsed["changes"]]
        assert times == sorted(times) and times
    assert load_signal(tmp_path / "sync_output.txt").resolution == 34


def test_experiment_negative_variants(tmp_path, small_coeffs):
    sig = SignalFile(125, 12, [100, 200, 300, 400])
    res = run_experiment(ExperimentConfig(small_coeffs, sig, [Variant.ORIGINAL, Variant.MODIFIED_LATCH], out_dir=tmp_path))
    assert res.verdict is None
    log = (tmp_path / "original_violations.log").read_text()
    assert "TokenFlood" in log
    assert "DataCorruption" in (tmp_path / "modified-latch_violations.log").read_text()


def test_cli_determinism(tmp_path, capsys):
    a = cli_session(tmp_path / "a")
    b = cli_session(tmp_path / "b")
    assert a == b
    assert "cmp/modified-dff.vcd" in a and "cmp/comparison.csv" in a
    assert "comparison: equal (0 mismatches)" in capsys.readouterr().out


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit):
        main([])
    with pytest.raises(SystemExit):
        main(["simulate", "--variant", "bogus", "--coeffs", "c", "--signal", "s", "--out-dir", "o"])

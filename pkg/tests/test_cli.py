"""End-to-end tests of the command-line interface and its file formats."""

import json

import numpy as np
import pytest

from temporalwitness import protocols, simulator, stats
from temporalwitness.cli import format_counts_file, main, parse_counts_file
from temporalwitness.simulator import Scenario


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSimulate:
    def test_ideal_first_witness(self, capsys):
        code, out, _ = run(capsys, "simulate", "B1")
        assert code == 0
        assert "witness B1 value: 4.000000" in out
        assert "00 ++ 1" in out

    def test_noisy_three_step(self, capsys):
        code, out, _ = run(capsys, "simulate", "T", "--noise", "0.96", "0.98")
        assert code == 0
        assert "witness T value: 7.226112" in out

    def test_perfect_noise_is_ideal(self, capsys):
        code, out, _ = run(capsys, "simulate", "B1", "--noise", "1.0", "1.0")
        assert code == 0
        assert "witness B1 value: 4.000000" in out

    def test_protocol_file(self, capsys, tmp_path):
        spec = protocols.OPTIMAL_PULSES["B3"]
        path = tmp_path / "b3.protocol"
        path.write_text(protocols.format_protocol_spec(spec))
        code, out, _ = run(
            capsys, "simulate", "B3", "--protocol", str(path), "--length", "2"
        )
        assert code == 0
        assert "witness B3 value: 4.000000" in out

    def test_machine_format(self, capsys):
        code, out, _ = run(capsys, "simulate", "B2", "--format", "machine")
        assert code == 0
        doc = json.loads(out)
        assert doc["value"] == pytest.approx(4.0)
        assert doc["tool"] == "temporalwitness"
        assert len(doc["rows"]) == 16

    def test_unknown_witness(self, capsys):
        code, _, err = run(capsys, "simulate", "B7")
        assert code == 2
        assert "unknown witness" in err


class TestBound:
    def test_closed_form(self, capsys):
        code, out, _ = run(capsys, "bound", "T", "--method", "closed")
        assert code == 0
        assert "qubit bound: 5.2256" in out

    def test_closed_form_rejects_two_step(self, capsys):
        code, _, err = run(capsys, "bound", "B1", "--method", "closed")
        assert code == 2
        assert "closed form" in err

    def test_generic_two_step(self, capsys):
        code, out, _ = run(
            capsys, "bound", "B1", "--method", "generic", "--restarts", "3"
        )
        assert code == 0
        value = float(next(ln for ln in out.splitlines() if "qubit bound" in ln).split(":")[1])
        assert value == pytest.approx(3.0, abs=2e-3)

    def test_machine_report_deterministic(self, capsys):
        args = ("bound", "B2", "--restarts", "2", "--seed", "7", "--format", "machine")
        _, out1, _ = run(capsys, *args)
        _, out2, _ = run(capsys, *args)
        assert out1 == out2
        doc = json.loads(out1)
        assert doc["seed"] == 7
        assert doc["method"] == "nested_generic"


class TestPolytope:
    def test_three_step_witness(self, capsys):
        code, out, _ = run(capsys, "polytope", "T")
        assert code == 0
        assert "algebraic max: 8" in out
        assert "independent AoT constraints: 14" in out
        assert "deterministic strategies: 16384" in out
        assert "maximizers: 1" in out

    def test_two_step_witness(self, capsys):
        code, out, _ = run(capsys, "polytope", "B2")
        assert code == 0
        assert "algebraic max: 4" in out
        assert "independent AoT constraints: 2" in out

    def test_bare_scenario(self, capsys):
        code, out, _ = run(capsys, "polytope", "--scenario", "1", "2", "2")
        assert code == 0
        assert "independent AoT constraints: 0" in out

    def test_guard_exit_code(self, capsys):
        code, _, err = run(capsys, "polytope", "--scenario", "8", "4", "4")
        assert code == 3
        assert "guard" in err

    def test_needs_witness_or_scenario(self, capsys):
        code, _, err = run(capsys, "polytope")
        assert code == 2


class TestCountsFiles:
    def test_round_trip(self, tmp_path):
        table = simulator.sequence_probabilities(protocols.optimal_protocol("B1"), 2)
        counts = stats.sample_counts(table, 1000, rng=5)
        text = format_counts_file(counts, witness_id="B1")
        parsed, wid = parse_counts_file(text)
        assert wid == "B1"
        assert np.array_equal(parsed.counts, counts.counts)
        assert format_counts_file(parsed, witness_id=wid) == text

    def test_rejects_unknown_key(self):
        text = "counts v1\nlength: 1\nsettings: 1\noutcomes: 2\ncolour: red\n"
        with pytest.raises(ValueError, match="unknown counts-file key"):
            parse_counts_file(text)

    def test_rejects_sum_mismatch(self):
        text = (
            "counts v1\nlength: 1\nsettings: 1\noutcomes: 2\n"
            "sequence: 0\nn: 10\ndiscarded: 0\n+ 5\n- 4\n"
        )
        with pytest.raises(ValueError, match="sum to"):
            parse_counts_file(text)

    def test_rejects_missing_sequences(self):
        text = (
            "counts v1\nlength: 1\nsettings: 2\noutcomes: 2\n"
            "sequence: 0\nn: 10\ndiscarded: 0\n+ 5\n- 5\n"
        )
        with pytest.raises(ValueError, match="every setting sequence"):
            parse_counts_file(text)

    def test_rejects_duplicates(self):
        text = (
            "counts v1\nlength: 1\nsettings: 1\noutcomes: 2\n"
            "sequence: 0\nn: 10\ndiscarded: 0\n+ 5\n- 5\n"
            "sequence: 0\nn: 10\ndiscarded: 0\n+ 5\n- 5\n"
        )
        with pytest.raises(ValueError, match="duplicate"):
            parse_counts_file(text)


class TestSampleAndCertify:
    def test_pipeline(self, capsys, tmp_path):
        path = tmp_path / "counts.txt"
        code, _, _ = run(
            capsys, "sample", "T", "--shots", "3000", "--seed", "11",
            "--noise", "0.96", "0.98", "--output", str(path),
        )
        assert code == 0
        code, out, _ = run(capsys, "certify", str(path))
        assert code == 0
        assert "verdict: dimension >= 3 certified" in out
        assert "violation ratio" in out

    def test_sample_deterministic(self, capsys):
        args = ("sample", "B1", "--shots", "100", "--seed", "3")
        _, out1, _ = run(capsys, *args)
        _, out2, _ = run(capsys, *args)
        assert out1 == out2

    def test_certify_machine_report(self, capsys, tmp_path):
        path = tmp_path / "counts.txt"
        run(capsys, "sample", "B1", "--shots", "1000", "--seed", "2",
            "--noise", "0.96", "0.98", "--output", str(path))
        code, out, _ = run(capsys, "certify", str(path), "--format", "machine")
        assert code == 0
        doc = json.loads(out)
        assert doc["witness_id"] == "B1"
        assert len(doc["input_sha256"]) == 64
        assert doc["confidence"] == 0.68

    def test_certify_missing_file(self, capsys):
        code, _, err = run(capsys, "certify", "/no/such/file")
        assert code == 2

    def test_certify_needs_witness(self, capsys, tmp_path):
        table = simulator.sequence_probabilities(protocols.optimal_protocol("B1"), 2)
        counts = stats.sample_counts(table, 100, rng=1)
        path = tmp_path / "anon.txt"
        path.write_text(format_counts_file(counts))
        code, _, err = run(capsys, "certify", str(path))
        assert code == 2
        assert "--witness" in err
        code, out, _ = run(capsys, "certify", str(path), "--witness", "B1")
        assert code == 0

    def test_simulate_to_certify_round_trip(self, capsys, tmp_path):
        # Exact expected counts stand in for the infinite-shot limit; the
        # certified value must reproduce the simulated one.
        code, out, _ = run(
            capsys, "simulate", "B2", "--noise", "0.96", "0.98", "--format", "machine"
        )
        simulated = json.loads(out)["value"]
        protocol = protocols.optimal_protocol("B2")
        table = simulator.apply_readout_noise(
            simulator.sequence_probabilities(protocol, 2),
            simulator.protocol_detection_resolver(protocol),
            simulator.ReadoutNoise(),
        )
        n = 1250**2
        counts = stats.CountsTable(
            table.scenario, np.rint(table.probs * n).astype(np.int64)
        )
        path = tmp_path / "exact.txt"
        path.write_text(format_counts_file(counts, witness_id="B2"))
        code, out, _ = run(capsys, "certify", str(path), "--format", "machine")
        assert code == 0
        assert json.loads(out)["value"] == pytest.approx(simulated, abs=1e-6)


class TestAotTestCommand:
    def test_exact_counts_score_zero(self, capsys, tmp_path):
        protocol = protocols.optimal_protocol("B2")
        table = simulator.apply_readout_noise(
            simulator.sequence_probabilities(protocol, 2),
            simulator.protocol_detection_resolver(protocol),
            simulator.ReadoutNoise(),
        )
        counts = stats.CountsTable(
            table.scenario, np.round(table.probs * 10000).astype(np.int64)
        )
        path = tmp_path / "exact.txt"
        path.write_text(format_counts_file(counts))
        code, out, _ = run(capsys, "aot-test", str(path))
        assert code == 0
        assert "sigma equivalent: 0.000" in out

    def test_signaling_flagged(self, capsys, tmp_path):
        probs = np.array(
            [
                [0.6, 0.0, 0.4, 0.0],
                [0.5, 0.0, 0.5, 0.0],
                [0.5, 0.0, 0.5, 0.0],
                [0.5, 0.0, 0.5, 0.0],
            ]
        )
        counts = stats.CountsTable(
            Scenario(2, 2, 2), np.round(probs * 12000).astype(np.int64)
        )
        path = tmp_path / "sig.txt"
        path.write_text(format_counts_file(counts))
        code, out, _ = run(capsys, "aot-test", str(path), "--format", "machine")
        assert code == 0
        assert json.loads(out)["sigma_equivalent"] >= 3.0

    def test_montecarlo_flag(self, capsys, tmp_path):
        table = simulator.sequence_probabilities(protocols.optimal_protocol("B2"), 2)
        noisy = simulator.apply_readout_noise(
            table,
            simulator.protocol_detection_resolver(protocols.optimal_protocol("B2")),
            simulator.ReadoutNoise(),
        )
        counts = stats.sample_counts(noisy, 1000, rng=9)
        path = tmp_path / "mc.txt"
        path.write_text(format_counts_file(counts))
        code, out, _ = run(
            capsys, "aot-test", str(path), "--montecarlo", "50", "--seed", "4"
        )
        assert code == 0
        assert "monte-carlo p-value" in out

import json

import numpy as np
import pytest

from lossyqpt import serialize
from lossyqpt.channels import ChiMatrix, pauli_basis
from lossyqpt.cli import main
from lossyqpt.simulator import PpbsParams, ppbs_chi


def run(*argv):
    return main(list(argv))


def write_reference(path, gamma):
    serialize.write_json(
        path, serialize.chi_to_dict(ppbs_chi(PpbsParams.from_gamma(gamma)))
    )


class TestSimulateCommand:
    def test_noiseless_identity_table(self, tmp_path):
        out = tmp_path / "counts.json"
        assert run("simulate", "--gamma", "1.0", "--noise", "none",
                   "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["kind"] == "count_table"
        assert doc["counts"][0][0] == 10000
        assert doc["manifest"] == "counts.json.manifest.json"
        manifest = json.loads((tmp_path / "counts.json.manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["outputs"] == ["counts.json"]

    def test_byte_identical_reruns(self, tmp_path):
        out = tmp_path / "counts.json"
        run("simulate", "--gamma", "0.255", "--seed", "7", "--out", str(out))
        first = out.read_bytes()
        run("simulate", "--gamma", "0.255", "--seed", "7", "--out", str(out))
        assert out.read_bytes() == first

    def test_gamma_domain_usage_error(self, tmp_path, capsys):
        code = run("simulate", "--gamma", "1.2", "--out", str(tmp_path / "x.json"))
        assert code == 2
        assert "gamma" in capsys.readouterr().err

    def test_gamma_and_transmittivities_conflict(self, tmp_path):
        assert run("simulate", "--gamma", "0.5", "--t-h", "1.0", "--t-v", "0.5",
                   "--out", str(tmp_path / "x.json")) == 2

    def test_seed_env_var(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        monkeypatch.setenv("LOSSYQPT_SEED", "99")
        run("simulate", "--gamma", "0.5", "--out", str(a))
        monkeypatch.delenv("LOSSYQPT_SEED")
        run("simulate", "--gamma", "0.5", "--seed", "99", "--out", str(b))
        assert json.loads(a.read_text())["counts"] == json.loads(b.read_text())["counts"]

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"gamma": 0.5, "noise": "none", "exposure": 400}))
        out = tmp_path / "c.json"
        assert run("simulate", "--config", str(cfg), "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["exposure"] == 400
        # flag wins over config
        out2 = tmp_path / "c2.json"
        run("simulate", "--config", str(cfg), "--exposure", "800", "--out", str(out2))
        assert json.loads(out2.read_text())["exposure"] == 800


class TestReconstructCommand:
    def test_linear_on_noiseless_counts(self, tmp_path):
        counts = tmp_path / "counts.json"
        run("simulate", "--gamma", "0.5", "--noise", "none", "--out", str(counts))
        ref = tmp_path / "ref.json"
        write_reference(ref, 0.5)
        out = tmp_path / "fit.json"
        assert run("reconstruct", "--counts", str(counts), "--method", "linear",
                   "--reference", str(ref), "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["method"] == "linear"
        assert doc["fidelity_vs_reference"] == pytest.approx(1.0, abs=1e-8)
        chi = serialize.chi_from_dict(doc["chi"])
        expected = ppbs_chi(PpbsParams.from_gamma(0.5))
        assert np.abs(chi.mat - expected.mat).max() < 1e-8

    def test_mle_on_poisson_counts(self, tmp_path):
        counts = tmp_path / "counts.json"
        run("simulate", "--gamma", "0.5", "--seed", "3", "--out", str(counts))
        ref = tmp_path / "ref.json"
        write_reference(ref, 0.5)
        out = tmp_path / "fit.json"
        assert run("reconstruct", "--counts", str(counts), "--method", "mle",
                   "--reference", str(ref), "--restarts", "2",
                   "--maxfev", "10000", "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["fidelity_vs_reference"] >= 0.96
        assert doc["p_operator"]["classification"] == "state-dependent"
        assert doc["p_operator"]["eigenvalues"][-1] == pytest.approx(1.0, abs=1e-9)

    def test_post_selected_matches_linear_on_tp_data(self, tmp_path):
        counts = tmp_path / "counts.json"
        run("simulate", "--gamma", "1.0", "--noise", "none", "--out", str(counts))
        lin, ps = tmp_path / "lin.json", tmp_path / "ps.json"
        run("reconstruct", "--counts", str(counts), "--method", "linear",
            "--out", str(lin))
        run("reconstruct", "--counts", str(counts), "--method", "post-selected",
            "--out", str(ps))
        chi_lin = serialize.chi_from_dict(json.loads(lin.read_text())["chi"])
        chi_ps = serialize.chi_from_dict(json.loads(ps.read_text())["chi"])
        assert np.abs(chi_lin.mat - chi_ps.mat).max() < 1e-10

    def test_unreadable_counts_is_data_error(self, tmp_path):
        assert run("reconstruct", "--counts", str(tmp_path / "nope.json"),
                   "--method", "linear", "--out", str(tmp_path / "o.json")) == 3

    def test_malformed_counts_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schema": 1, "kind": "count_table"}))
        assert run("reconstruct", "--counts", str(bad), "--method", "linear",
                   "--out", str(tmp_path / "o.json")) == 3

    def test_deterministic_fit_report(self, tmp_path):
        counts = tmp_path / "counts.json"
        run("simulate", "--gamma", "0.4", "--seed", "5", "--out", str(counts))
        out = tmp_path / "fit.json"
        run("reconstruct", "--counts", str(counts), "--method", "mle",
            "--restarts", "2", "--maxfev", "8000", "--seed", "1",
            "--out", str(out))
        first = out.read_bytes()
        run("reconstruct", "--counts", str(counts), "--method", "mle",
            "--restarts", "2", "--maxfev", "8000", "--seed", "1",
            "--out", str(out))
        assert out.read_bytes() == first


class TestSweepCommand:
    def test_csv_structure(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run("sweep", "--gammas", "0.5,1.0",
                   "--methods", "linear,post-selected", "--repeats", "2",
                   "--noise", "none", "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "# manifest: sweep.csv.manifest.json"
        header = lines[1].split(",")
        assert header == ["gamma", "method", "fidelity", "p_eig_1", "p_eig_2",
                          "objective", "min_chi_eigenvalue", "seed"]
        assert len(lines) == 2 + 2 * 2 * 2  # comment + header + rows

    def test_row_order_and_fidelity(self, tmp_path):
        out = tmp_path / "sweep.csv"
        run("sweep", "--gammas", "0.5,1.0", "--methods", "linear",
            "--noise", "none", "--out", str(out))
        rows = [line.split(",") for line in out.read_text().splitlines()[2:]]
        assert [r[0] for r in rows] == ["0.5", "1.0"]
        for r in rows:
            assert float(r[2]) == pytest.approx(1.0, abs=1e-8)

    def test_empty_methods_usage_error(self, tmp_path):
        assert run("sweep", "--gammas", "0.5", "--methods", ",",
                   "--out", str(tmp_path / "s.csv")) == 2

    def test_gamma_range_form(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run("sweep", "--gamma-range", "0.2:1.0:5", "--methods", "linear",
                   "--noise", "none", "--out", str(out)) == 0
        rows = out.read_text().splitlines()[2:]
        assert len(rows) == 5


class TestAnalyzeP:
    def test_classification_output(self, tmp_path, capsys):
        ref = tmp_path / "chi.json"
        write_reference(ref, 0.3)
        assert run("analyze-p", "--chi", str(ref)) == 0
        out = capsys.readouterr().out
        assert "state-dependent" in out
        eig_line = next(l for l in out.splitlines() if l.startswith("eigenvalues:"))
        values = json.loads(eig_line.split(":", 1)[1])
        assert values == pytest.approx([0.3, 1.0], abs=1e-9)

    def test_trace_preserving_tag(self, tmp_path, capsys):
        ref = tmp_path / "chi.json"
        write_reference(ref, 1.0)
        run("analyze-p", "--chi", str(ref))
        assert "trace-preserving" in capsys.readouterr().out

    def test_uniform_lossy_tag(self, tmp_path, capsys):
        chi = ChiMatrix(pauli_basis(), np.diag([0.7, 0, 0, 0]).astype(complex))
        path = tmp_path / "chi.json"
        serialize.write_json(path, serialize.chi_to_dict(chi))
        run("analyze-p", "--chi", str(path))
        assert "uniform-lossy" in capsys.readouterr().out

    def test_unphysical_chi_fails_numerically(self, tmp_path):
        chi = ChiMatrix(pauli_basis(), np.diag([1.1, 0, 0, 0]).astype(complex))
        path = tmp_path / "chi.json"
        serialize.write_json(path, serialize.chi_to_dict(chi))
        assert run("analyze-p", "--chi", str(path)) == 4

    def test_small_excess_warns_by_default(self, tmp_path, capsys):
        chi = ChiMatrix(pauli_basis(), np.diag([1.00005, 0, 0, 0]).astype(complex))
        path = tmp_path / "chi.json"
        serialize.write_json(path, serialize.chi_to_dict(chi))
        assert run("analyze-p", "--chi", str(path)) == 0
        assert "warning" in capsys.readouterr().err
        assert run("analyze-p", "--chi", str(path), "--on-unphysical", "fail") == 4


class TestRoundTrip:
    def test_chi_json_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(8)
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        chi = ChiMatrix(pauli_basis(), (g @ g.conj().T) / 10.0)
        p1 = tmp_path / "chi1.json"
        serialize.write_json(p1, serialize.chi_to_dict(chi))
        loaded = serialize.chi_from_dict(json.loads(p1.read_text()))
        assert np.array_equal(loaded.mat, chi.mat)
        p2 = tmp_path / "chi2.json"
        serialize.write_json(p2, serialize.chi_to_dict(loaded))
        assert p1.read_bytes() == p2.read_bytes()

    def test_count_table_round_trip(self, tmp_path):
        from lossyqpt.simulator import SimConfig, simulate_counts

        table = simulate_counts(SimConfig(PpbsParams.from_gamma(0.5), seed=2))
        doc = serialize.count_table_to_dict(table)
        back = serialize.count_table_from_dict(doc)
        assert np.array_equal(back.counts, table.counts)
        assert back.inputs == table.inputs
        assert back.exposure == table.exposure

    def test_schema_version_checked(self):
        with pytest.raises(Exception, match="schema"):
            serialize.chi_from_dict({"schema": 2, "kind": "chi_matrix"})

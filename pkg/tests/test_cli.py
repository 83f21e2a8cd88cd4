import csv
import io
import json

import numpy as np
import pytest

from mcmc_bench import cli
from mcmc_bench.exceptions import ConfigurationError, DegenerateWeightsError
from mcmc_bench.experiments import (EXPERIMENTS, RSS_LABEL, ExperimentConfig, rss_problem, run_experiment)


def _rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def _run(tmp_path, *argv):
    return cli.main(list(argv) + ["--out", str(tmp_path)])


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig("mixture")
        assert cfg.sampler == "imtm" and cfg.N == [1, 5, 50, 500] and cfg.T == [500] and cfg.runs == 200
        assert cfg.swept() == "N"

    def test_full_scale_flag(self):
        assert ExperimentConfig("mixture", paper_scale=True).runs == 3000

    @pytest.mark.parametrize("kwargs", [
        dict(experiment="other"), dict(experiment="mixture", sampler="gms"), dict(experiment="mixture", N=[0]),
        dict(experiment="mixture", runs=1), dict(experiment="mixture", eta=2.0),
        dict(experiment="mixture", burn_in=1.0), dict(experiment="gp", D=3),
        dict(experiment="mixture", N=[3], budget=10), dict(experiment="factorized", sampler="pmh", N=[1]),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(**kwargs)

    def test_budget_cells(self):
        cfg = ExperimentConfig("gp", N=[1, 10, 100], budget=1000)
        assert list(cfg.cells()) == [(1, 1000, 5.0), (10, 100, 5.0), (100, 10, 5.0)]

    def test_every_experiment_has_samplers(self):
        for name, samplers in EXPERIMENTS.items():
            assert ExperimentConfig(name).sampler in samplers


class TestExperiments:
    def test_smoke_mixture_csv(self, tmp_path):
        assert _run(tmp_path, "mixture", "--runs", "2", "--t", "50") == 0
        path = tmp_path / "mixture_imtm.csv"
        header = path.read_text().splitlines()[0]
        assert header.startswith("# config: ")
        assert json.loads(header[len("# config: "):])["runs"] == 2
        rows = _rows(path)
        assert [int(r["N"]) for r in rows] == [1, 5, 50, 500]
        assert set(rows[0]) == {"param_name", "param_value", "N", "T", "mse", "stderr", "ar", "ess_ratio", "E"}
        assert all(float(r["mse"]) >= 0 for r in rows)
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert "mixture_imtm" in summary

    def test_byte_identical_rerun(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["factorized", "--sampler", "pmh", "--n", "4", "--t", "30", "--runs", "3", "--seed", "9"]
        assert cli.main(args + ["--out", str(a)]) == 0
        assert cli.main(args + ["--out", str(b)]) == 0
        assert (a / "factorized_pmh.csv").read_bytes() == (b / "factorized_pmh.csv").read_bytes()

    def test_jobs_do_not_change_output(self, tmp_path):
        args = ["mixture", "--n", "3", "--t", "40", "--runs", "4"]
        assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
        assert cli.main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
        assert (tmp_path / "a" / "mixture_imtm.csv").read_bytes() == (tmp_path / "b" / "mixture_imtm.csv").read_bytes()

    def test_one_candidate_imtm_row_equals_imh(self):
        a = run_experiment(ExperimentConfig("mixture", sampler="imtm", N=[1], T=[100], runs=5))
        b = run_experiment(ExperimentConfig("mixture", sampler="imh", N=[1], T=[100], runs=5))
        assert a.rows[0]["mse"] == b.rows[0]["mse"] and a.rows[0]["ar"] == b.rows[0]["ar"]

    def test_pmh_without_resampling_equals_imtm2(self):
        a = run_experiment(ExperimentConfig("factorized", sampler="pmh", N=[5], T=[40], eta=0.0, runs=3))
        b = run_experiment(ExperimentConfig("factorized", sampler="imtm2", N=[5], T=[40], runs=3))
        assert a.rows[0]["mse"] == b.rows[0]["mse"]

    def test_gp_budget_accounting(self, tmp_path):
        assert _run(tmp_path, "gp", "--sampler", "imtm2", "--n", "2", "10", "--budget", "20", "--runs", "2",
                    "--grid-size", "40") == 0
        rows = _rows(tmp_path / "gp_imtm2.csv")
        assert [(int(r["N"]), int(r["T"]), int(r["E"])) for r in rows] == [(2, 10, 20), (10, 2, 20)]

    def test_gp_static_is_budget(self):
        res = run_experiment(ExperimentConfig("gp", sampler="is", N=[50], T=[1], runs=2, grid_size=40))
        assert res.rows[0]["E"] == 50

    @pytest.mark.parametrize("sampler", ["gms", "imtm", "parallel_mh"])
    def test_wsn_budget(self, sampler):
        res = run_experiment(ExperimentConfig("wsn", sampler=sampler, N=[10], T=[5], runs=2))
        assert res.rows[0]["E"] == 50

    def test_recovered_chains_option(self):
        base = run_experiment(ExperimentConfig("wsn", N=[20], T=[5], runs=2)).rows[0]
        rec = run_experiment(ExperimentConfig("wsn", N=[20], T=[5], runs=2, C=500)).rows[0]
        assert rec["E"] == base["E"] == 100
        assert rec["mse"] != base["mse"]
        assert rec["mse"] == pytest.approx(base["mse"], rel=0.05)

    def test_rss_label(self, tmp_path):
        assert _run(tmp_path, "rss", "--sampler", "mh", "--n", "1", "--t", "50", "--runs", "2",
                    "--grid-size", "60") == 0
        lines = (tmp_path / "rss_mh.csv").read_text().splitlines()
        assert lines[1] == f"# {RSS_LABEL}"
        assert json.loads((tmp_path / "summary.json").read_text())["rss_mh"]["label"] == RSS_LABEL

    def test_rss_grid_refinement(self):
        _, t200 = rss_problem(0, 200)
        _, t400 = rss_problem(0, 400)
        assert np.max(np.abs(t200 - t400)) <= 1e-3


class TestCli:
    def test_config_file_with_override(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("sampler: imtm2\nN: [3]\nT: [20]\nruns: 2\nseed: 4\n")
        assert _run(tmp_path, "mixture", "--config", str(cfg), "--t", "30") == 0
        rows = _rows(tmp_path / "mixture_imtm2.csv")
        assert [(int(r["N"]), int(r["T"])) for r in rows] == [(3, 30)]

    def test_config_file_unknown_field(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("bogus: 1\n")
        assert _run(tmp_path, "mixture", "--config", str(cfg)) == 2
        assert "bogus" in capsys.readouterr().err

    def test_config_file_not_a_mapping(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("- 1\n- 2\n")
        assert _run(tmp_path, "mixture", "--config", str(cfg)) == 2

    def test_invalid_values_exit_two(self, tmp_path):
        assert _run(tmp_path, "mixture", "--runs", "1") == 2
        assert _run(tmp_path, "mixture", "--burn-in", "1.5") == 2
        assert not (tmp_path / "mixture_imtm.csv").exists()

    def test_numerical_degeneracy_exits_three(self, tmp_path, monkeypatch, capsys):
        def boom(cfg):
            raise DegenerateWeightsError("all weights zero", step=2)

        monkeypatch.setattr(cli, "run_experiment", boom)
        assert _run(tmp_path, "mixture", "--runs", "2") == 3
        assert "degeneracy" in capsys.readouterr().err

    def test_unknown_sampler_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            _run(tmp_path, "mixture", "--sampler", "gms")
        assert info.value.code == 2

    def test_verify(self, capsys):
        assert cli.main(["verify", "--instances", "3"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 9 and all(line.startswith("PASS") for line in out)

    def test_verify_reports_failure(self, monkeypatch, capsys):
        monkeypatch.setattr(cli, "stationarity_report", lambda *a: [("MH", 1e-3, 0.0)])
        assert cli.main(["verify"]) == 1
        assert capsys.readouterr().out.startswith("FAIL")

    def test_verify_bad_size(self):
        assert cli.main(["verify", "--k", "9"]) == 2

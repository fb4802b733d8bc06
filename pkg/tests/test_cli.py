"""End-to-end CLI behaviour: subcommands, config precedence, exit codes."""

import json

import pytest

from wugo.cli import main, parse_config_file

FAST_CONF = """
# fast settings for tests
n_init = 3
n_sample = 5
budget = 3
candidates_kind = grid2d
candidates_size = 15
"""


@pytest.fixture()
def fast_config(tmp_path):
    path = tmp_path / "fast.conf"
    path.write_text(FAST_CONF)
    return str(path)


class TestConfigFile:
    def test_parse_key_values(self, tmp_path):
        p = tmp_path / "c.conf"
        p.write_text("budget = 7\nkappa = 0.5  # inline comment\nwarm_start = false\n")
        got = parse_config_file(str(p))
        assert got == {"budget": 7, "kappa": 0.5, "warm_start": False}

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.conf"
        p.write_text("learning_rate = 3\n")
        from wugo.cli import CliError
        with pytest.raises(CliError):
            parse_config_file(str(p))

    def test_flags_override_config(self, tmp_path, capsys):
        p = tmp_path / "c.conf"
        p.write_text(FAST_CONF + "seed = 1\n")
        out = tmp_path / "res"
        code = main([
            "run", "--blackbox", "three_hump_camel", "--method", "ego_gp",
            "--config", str(p), "--seed", "9", "--out", str(out),
        ])
        assert code == 0
        rec = json.loads(next((out / "records").glob("*.json")).read_text())
        assert rec["config"]["seed"] == 9
        assert rec["config"]["budget"] == 3


class TestRunCommand:
    def test_run_writes_record(self, tmp_path, fast_config, capsys):
        out = tmp_path / "res"
        code = main([
            "run", "--blackbox", "three_hump_camel", "--method", "ego_gp",
            "--config", fast_config, "--seed", "7", "--out", str(out),
        ])
        assert code == 0
        files = list((out / "records").glob("*.json"))
        assert len(files) == 1
        text = capsys.readouterr().out
        assert "three_hump_camel / ego_gp" in text

    def test_bad_method_exits_1(self, fast_config):
        assert main([
            "run", "--blackbox", "ackley", "--method", "annealing",
            "--config", fast_config,
        ]) == 1

    def test_bad_blackbox_exits_1(self, fast_config):
        assert main([
            "run", "--blackbox", "styblinski", "--method", "ego_gp",
            "--config", fast_config,
        ]) == 1

    def test_negative_kappa_exits_1(self, fast_config):
        assert main([
            "run", "--blackbox", "ackley", "--method", "lcb_gp",
            "--config", fast_config, "--kappa", "-1",
        ]) == 1


class TestBenchCommand:
    def test_bench_emits_outputs(self, tmp_path, fast_config):
        out = tmp_path / "res"
        code = main([
            "bench", "--suite", "builtin", "--experiments", "three_hump_camel",
            "--method", "ego_gp", "--seed", "5", "--repeats", "2",
            "--config", fast_config, "--out", str(out),
        ])
        assert code == 0
        assert (out / "summary.csv").is_file()
        assert (out / "summary.json").is_file()
        assert (out / "curves_three_hump_camel_ego_gp.csv").is_file()
        assert (out / "convergence_three_hump_camel.png").is_file()
        assert len(list((out / "records").glob("*.json"))) == 2

    def test_no_figures_flag(self, tmp_path, fast_config):
        out = tmp_path / "res"
        code = main([
            "bench", "--experiments", "three_hump_camel", "--method", "ego_gp",
            "--seed", "5", "--repeats", "1", "--config", fast_config,
            "--out", str(out), "--no-figures",
        ])
        assert code == 0
        assert not list(out.glob("*.png"))


class TestAblateCommand:
    def test_ablation_outputs(self, tmp_path, fast_config):
        out = tmp_path / "res"
        code = main([
            "ablate", "--blackbox", "three_hump_camel", "--method", "ego_gp",
            "--kappas", "0.5,2.0", "--repeats", "1", "--seed", "3",
            "--config", fast_config, "--out", str(out),
        ])
        assert code == 0
        assert (out / "ablation_three_hump_camel.csv").is_file()
        assert (out / "ablation_three_hump_camel.png").is_file()
        body = (out / "ablation_three_hump_camel.csv").read_text()
        assert body.startswith("kappa,p,stderr")
        assert len(body.strip().split("\n")) == 3

    def test_empty_kappas_exit_1(self, fast_config, tmp_path):
        assert main([
            "ablate", "--blackbox", "ackley", "--kappas", ",",
            "--config", fast_config, "--out", str(tmp_path),
        ]) == 1


class TestReportCommand:
    def test_report_regenerates_from_records(self, tmp_path, fast_config, capsys):
        out = tmp_path / "res"
        main([
            "bench", "--experiments", "three_hump_camel", "--method", "ego_gp",
            "--seed", "5", "--repeats", "2", "--config", fast_config,
            "--out", str(out), "--no-figures",
        ])
        (out / "summary.csv").unlink()
        code = main(["report", "--in", str(out), "--format", "csv"])
        assert code == 0
        assert (out / "summary.csv").is_file()
        assert (out / "convergence_three_hump_camel.png").is_file()

    def test_missing_records_exit_1(self, tmp_path):
        assert main(["report", "--in", str(tmp_path)]) == 1

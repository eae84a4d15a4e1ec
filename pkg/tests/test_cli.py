import csv
import json
from dataclasses import replace

import pytest

from toolaif.cli import cli_main, run_config
from toolaif.io import (
    ParseError,
    RunConfig,
    ValidationError,
    emit_outputs,
    fill_defaults,
    parse_config,
    render_config,
    verify_manifest,
)


class TestParse:
    def test_minimal_exp1_defaults(self):
        cfg = parse_config("experiment = 1\n")
        assert (cfg.gamma, cfg.alpha_init, cfg.eta) == (16.0, 1.0, 1.0)

    def test_learning_experiments_use_calibrated_defaults(self):
        from toolaif.experiments import experiment_defaults

        cfg = parse_config("experiment = 2\n")
        assert (cfg.alpha_init, cfg.eta) == (experiment_defaults(2)["alpha_init"], experiment_defaults(2)["eta"])
        assert parse_config("experiment = 3\nalpha_init = 0.7\n").alpha_init == 0.7

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# header\n\nexperiment = 2  # continual\nfinal_corner = Northwest\n")
        assert cfg.experiment == 2 and cfg.final_corner == "Northwest"

    def test_negative_gamma(self):
        with pytest.raises(ValidationError) as exc:
            parse_config("experiment = 1\ngamma = -1\n")
        assert "line 2" in str(exc.value) and "gamma" in str(exc.value)

    def test_unknown_key_named(self):
        with pytest.raises(ParseError) as exc:
            parse_config("experiment = 1\ntemprature = 3\n")
        assert "temprature" in str(exc.value) and "line 2" in str(exc.value)

    def test_missing_experiment(self):
        with pytest.raises(ParseError):
            parse_config("gamma = 4\n")

    def test_bad_number(self):
        with pytest.raises(ParseError) as exc:
            parse_config("experiment = 2\nnum_trials = many\n")
        assert "line 2" in str(exc.value)

    def test_bad_corner(self):
        with pytest.raises(ValidationError):
            parse_config("experiment = 3\nfinal_corner = East\n")

    @pytest.mark.parametrize("text", [
        "experiment = 1\n",
        "experiment = 3\nutility_only = true\nfinal_corner = Northwest\nnum_trials = 4\ngamma = 0.1\n",
        "experiment = 2\nalpha_init = 0.3\neta = 2.5\nbase_seed = 9\noutput_dir = x/y\n",
    ])
    def test_round_trip(self, text):
        cfg = parse_config(text)
        assert parse_config(render_config(cfg)) == cfg


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def exp1_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp1")
    cfg = parse_config(f"experiment = 1\noutput_dir = {out}\n")
    emit_outputs(run_config(cfg), out, cfg)
    return out


def test_actions_first_row_northleft(exp1_outputs):
    rows = _rows(exp1_outputs / "actions.csv")
    assert rows[0] == ["trial", "run", "step", "action", "observed_room", "observed_tool", "observed_reward"]
    assert rows[1][3] == "Pick-up" and rows[1][6] == "Reward"


def test_efe_epistemic_columns_zero(exp1_outputs):
    rows = _rows(exp1_outputs / "efe.csv")
    assert rows[0] == ["policy_index", "utility", "state_ig", "param_ig", "G"]
    assert len(rows) == 1 + 6 * 256
    assert all(float(r[2]) == 0.0 and float(r[3]) == 0.0 for r in rows[1:])


def test_headers_and_lf(exp1_outputs):
    for name, header in [("steps.csv", "trial,run,steps_to_solve"),
                         ("ranks.csv", "trial,run,step,utility_rank,infogain_rank"),
                         ("probes.csv", "trial,cumulative_step,probe_name,probability")]:
        raw = (exp1_outputs / name).read_bytes()
        assert b"\r" not in raw
        assert raw.decode("utf-8").split("\n", 1)[0] == header


def test_manifest_checksums(exp1_outputs):
    assert verify_manifest(exp1_outputs) == []
    manifest = json.loads((exp1_outputs / "manifest.json").read_text())
    assert manifest["config"]["experiment"] == 1
    assert set(manifest["defaults"]) == {"1", "2", "3"}
    (exp1_outputs / "steps.csv").write_text("tampered\n")
    assert verify_manifest(exp1_outputs) == ["steps.csv"]


def test_steps_csv_matches_report(tmp_path):
    cfg = parse_config("experiment = 1\n")
    report = run_config(cfg)
    emit_outputs(report, tmp_path, cfg)
    rows = _rows(tmp_path / "steps.csv")[1:]
    assert [int(r[2]) for r in rows] == [t.steps_to_solve[0] for t in report.trials]


def test_byte_identical_reruns(tmp_path):
    text = "experiment = 3\nnum_trials = 1\nbase_seed = 5\n"
    cfg = fill_defaults(replace(parse_config(text)))
    for sub in ("a", "b"):
        emit_outputs(run_config(cfg), tmp_path / sub, cfg, timestamp="fixed")
    for name in ("steps.csv", "ranks.csv", "probes.csv", "actions.csv", "baseline_steps.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_probe_values_reparse(tmp_path):
    cfg = parse_config("experiment = 2\nnum_trials = 1\n")
    cfg = replace(cfg, num_trials=1)
    from toolaif.experiments import Schedule, run_schedule
    from toolaif.engine import AgentConfig
    from toolaif.env import Location

    report = run_schedule("small", Schedule(((Location.NORTH_RIGHT, 2),)), AgentConfig(), 0.5)
    emit_outputs(report, tmp_path, cfg)
    rows = [r for r in _rows(tmp_path / "probes.csv")[1:] if r[2] == "V"]
    expected = report.trials[0].probes["V"]
    assert len(rows) == len(expected)
    assert all(float(r[3]) == pytest.approx(v, rel=1e-8) for r, v in zip(rows, expected))


class TestMain:
    def test_oracle(self, capsys):
        assert cli_main(["oracle"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert [int(line.split("\t")[1]) for line in lines] == [1, 2, 2, 3, 3, 4]

    def test_validate_good(self, tmp_path):
        p = tmp_path / "good.cfg"
        p.write_text("experiment = 2\n")
        assert cli_main(["validate", str(p)]) == 0

    def test_validate_bad(self, tmp_path, capsys):
        p = tmp_path / "bad.cfg"
        p.write_text("experiment = 2\ngamma = -1\n")
        assert cli_main(["validate", str(p)]) != 0
        assert "gamma" in capsys.readouterr().err

    def test_run_missing_file(self, capsys):
        assert cli_main(["run", "missing.cfg"]) != 0
        assert "file not found" in capsys.readouterr().err

    def test_no_subcommand(self):
        assert cli_main([]) != 0

    def test_run_with_flags(self, tmp_path):
        p = tmp_path / "e1.cfg"
        p.write_text("experiment = 1\n")
        out = tmp_path / "out"
        assert cli_main(["run", "--config", str(p), "--out", str(out), "--seed", "3"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["base_seed"] == 3
        assert verify_manifest(out) == []

    def test_run_rejects_bad_override(self, tmp_path):
        p = tmp_path / "e2.cfg"
        p.write_text("experiment = 2\n")
        assert cli_main(["run", str(p), "--trials", "0", "--out", str(tmp_path / "o")]) != 0

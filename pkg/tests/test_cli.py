"""CLI surface: commands, exit codes, idempotent reports."""

from __future__ import annotations

import json

import pytest

from flucaster.cli import main
from flucaster.data import write_ili_csv
from flucaster.synthetic import SyntheticConfig, generate_synthetic

HEADER = "location,year,week,ili_pct,ili_count,total_visits,providers"


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--out", str(out), "--seed", "3"]) == 0
    return out


@pytest.fixture(scope="module")
def run_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    config = {
        "data_path": str(sim_dir / "data.csv"),
        "adjacency_path": str(sim_dir / "adjacency.csv"),
        "output_dir": str(out / "run"),
        "train_seasons": ["2011-12"],
        "test_seasons": ["2012-13"],
        "classes": ["linear", "lvcf"],
        "variants": ["isolated", "neighbors"],
    }
    cfg = out / "config.json"
    cfg.write_text(json.dumps(config))
    assert main(["backtest", "--config", str(cfg)]) == 0
    return out / "run"


def test_no_command_is_usage_error(capsys):
    assert main([]) == 1
    assert main(["backtest"]) == 1  # neither --config nor --resume
    capsys.readouterr()


def test_unknown_command_is_usage_error():
    assert main(["frobnicate"]) == 1


def test_version_flag():
    assert main(["--version"]) == 0


def test_validate_clean_synthetic(sim_dir, tmp_path, capsys):
    rc = main(
        [
            "validate",
            "--data", str(sim_dir / "data.csv"),
            "--train-seasons", "2011-12",
            "--test-seasons", "2012-13",
            "--out", str(tmp_path / "report"),
        ]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "train=31" in out and "test=31" in out
    report = json.loads((tmp_path / "report" / "validation_report.json").read_text())
    assert report["rejected_rows"] == []
    assert (tmp_path / "report" / "metadata.json").exists()


def test_validate_paper_span_counts(tmp_path, capsys):
    # A table covering the paper's seasons audits to 156 train / 124 test
    # in-season weeks per state (here on a two-state synthetic stand-in).
    table = generate_synthetic(
        SyntheticConfig(states=("MA", "VT"), start_year=2010, n_seasons=9), seed=1
    )
    path = tmp_path / "span.csv"
    write_ili_csv(table, path)
    rc = main(["validate", "--data", str(path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "train=156" in out
    assert "test=124" in out
    assert "min=156 max=156" in out
    assert "min=124 max=124" in out


def test_validate_duplicate_key_exit_2(tmp_path, capsys):
    path = tmp_path / "dup.csv"
    path.write_text(
        f"{HEADER}\nGA,2015,40,2.0,40,2000,12\nGA,2015,40,2.0,40,2000,12\n"
    )
    rc = main(["validate", "--data", str(path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "GA 2015w40" in err


def test_validate_rejected_rows_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text(f"{HEADER}\nGA,2015,40,2.0,4000,2000,12\n")
    rc = main(["validate", "--data", str(path)])
    captured = capsys.readouterr()
    assert rc == 2
    assert "rejected" in captured.err


def test_validate_missing_file_exit_2(tmp_path):
    assert main(["validate", "--data", str(tmp_path / "nope.csv")]) == 2


def test_simulate_outputs(sim_dir):
    assert (sim_dir / "data.csv").exists()
    assert (sim_dir / "adjacency.csv").exists()
    config = json.loads((sim_dir / "synthetic_config.json").read_text())
    assert config["seed"] == 3
    assert (sim_dir / "metadata.json").exists()


def test_simulate_ar_mode(tmp_path):
    out = tmp_path / "ar"
    assert main(["simulate", "--out", str(out), "--mode", "ar", "--seed", "2"]) == 0
    assert json.loads((out / "synthetic_config.json").read_text())["mode"] == "ar"


def test_backtest_then_score_and_report(run_dir, capsys):
    assert main(["score", "--run", str(run_dir)]) == 0
    assert main(["report", "--run", str(run_dir)]) == 0
    capsys.readouterr()
    report = (run_dir / "report" / "report.txt").read_text()
    assert "class: linear" in report
    assert "class: lvcf" in report
    assert "best/worst" in report
    assert (run_dir / "report" / "diff_linear_by_state.csv").exists()
    assert (run_dir / "report" / "diff_linear_by_week.csv").exists()


def test_report_rerun_identical_bytes(run_dir, capsys):
    report_path = run_dir / "report" / "report.txt"
    diff_path = run_dir / "report" / "diff_linear_by_state.csv"
    assert main(["report", "--run", str(run_dir)]) == 0
    first = (report_path.read_bytes(), diff_path.read_bytes())
    assert main(["report", "--run", str(run_dir)]) == 0
    capsys.readouterr()
    assert (report_path.read_bytes(), diff_path.read_bytes()) == first


def test_lvcf_only_report_single_section(sim_dir, tmp_path, capsys):
    config = {
        "data_path": str(sim_dir / "data.csv"),
        "adjacency_path": str(sim_dir / "adjacency.csv"),
        "output_dir": str(tmp_path / "run"),
        "train_seasons": ["2011-12"],
        "test_seasons": ["2012-13"],
        "classes": ["lvcf"],
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    assert main(["backtest", "--config", str(cfg)]) == 0
    assert main(["report", "--run", str(tmp_path / "run")]) == 0
    capsys.readouterr()
    report = (tmp_path / "run" / "report" / "report.txt").read_text()
    assert report.count("== class:") == 1


def test_backtest_resume_flag(run_dir, capsys):
    assert main(["backtest", "--resume", str(run_dir)]) == 0
    capsys.readouterr()


def test_score_on_non_run_dir(tmp_path, capsys):
    assert main(["score", "--run", str(tmp_path)]) == 3
    capsys.readouterr()


def test_bad_config_exit_2(tmp_path, sim_dir):
    cfg = tmp_path / "bad.json"
    cfg.write_text(
        json.dumps(
            {
                "data_path": str(sim_dir / "data.csv"),
                "output_dir": str(tmp_path / "run"),
                "train_seasons": ["2012-13"],
                "test_seasons": ["2011-12"],
            }
        )
    )
    assert main(["backtest", "--config", str(cfg)]) == 2

"""Command-line harness: config parsing and validation, experiment
runners, report rendering, determinism, and exit codes."""

import json

import numpy as np
import pytest

from condlaw import cli


def test_parse_json_config():
    raw = cli.parse_config_text('{"n": 3, "method": "odometer"}')
    assert raw == {"n": 3, "method": "odometer"}


def test_parse_key_value_config():
    text = """
    # comment line
    lam = 0.3
    y_grid = 20, 40, 80
    budget=1000000   # trailing comment
    """
    raw = cli.parse_config_text(text)
    assert raw["lam"] == 0.3
    assert raw["y_grid"] == [20, 40, 80]
    assert raw["budget"] == 1000000


def test_parse_bracketed_lists():
    raw = cli.parse_config_text("addresses = [6, 9, 1]\nn_grid=[100]\nempty = []\n")
    assert raw["addresses"] == [6, 9, 1]
    assert raw["n_grid"] == [100]
    assert raw["empty"] == []


def test_parse_rejects_garbage():
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text("just words, no separator")
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text("[1, 2, 3]")  # JSON but not an object


def test_validate_collects_every_problem():
    with pytest.raises(cli.ConfigError) as err:
        cli.validate_config("tails", {"y_grid": "soon", "bogus": 1})
    msg = str(err.value)
    assert "lam" in msg
    assert "budget" in msg
    assert "y_grid" in msg
    assert "bogus" in msg


def test_validate_fills_defaults():
    cfg = cli.validate_config("enumerate", {"n": 4})
    assert cfg["method"] == "auto"
    assert cfg["master_seed"] == 0


def test_validate_is_strict_about_types():
    # quoted numbers in a JSON config are rejected, with every offender
    # named at once
    with pytest.raises(cli.ConfigError) as err:
        cli.validate_config("tails", {"lam": "0.3", "y_grid": [20], "budget": "10000"})
    msg = str(err.value)
    assert "lam" in msg and "budget" in msg
    cfg = cli.validate_config("tails", {"lam": 0.3, "y_grid": [20], "budget": 10000})
    assert isinstance(cfg["budget"], int)


def test_unknown_experiment():
    with pytest.raises(cli.ConfigError):
        cli.validate_config("fourier", {})


def test_config_hash_stable_under_ordering():
    a = cli.config_hash({"n": 3, "method": "auto"})
    b = cli.config_hash({"method": "auto", "n": 3})
    assert a == b
    assert a != cli.config_hash({"n": 4, "method": "auto"})


def test_run_enumerate():
    cfg = cli.validate_config("enumerate", {"n": 3})
    report = cli.run("enumerate", cfg)
    assert report.passed
    assert report.csv_header == ("displacement", "count")
    assert [r[1] for r in report.csv_rows] == [24, 24, 12, 4]
    assert report.results["total_sequences"] == 64
    assert report.verdicts["counts_sum_matches"]


def test_run_hashing_sim_worked_example():
    cfg = cli.validate_config(
        "hashing-sim", {"m": 10, "addresses": [6, 9, 1, 9, 9, 6, 2, 5]}
    )
    report = cli.run("hashing-sim", cfg)
    assert report.results["total_displacement"] == 6
    assert sorted(report.results["block_lengths"]) == [4, 6]
    assert [r[3] for r in report.csv_rows] == [0, 0, 0, 1, 3, 1, 1, 0]


def test_run_hashing_sim_random_addresses():
    cfg = cli.validate_config("hashing-sim", {"m": 12, "n": 7, "master_seed": 5})
    a = cli.run("hashing-sim", cfg)
    b = cli.run("hashing-sim", cfg)
    assert a.csv_rows == b.csv_rows


def test_csv_render_deterministic():
    cfg = cli.validate_config("tails", {"lam": 0.3, "y_grid": [20], "budget": 100_000})
    first = cli.write_report(cli.run("tails", cfg), "csv")
    second = cli.write_report(cli.run("tails", cfg), "csv")
    assert first == second
    assert first.startswith("y,hits,draws,normalized,ci,verdict\n")


def test_workers_do_not_change_results():
    cfg = cli.validate_config("tails", {"lam": 0.3, "y_grid": [20], "budget": 150_000})
    serial = cli.run("tails", cfg, workers=1)
    parallel = cli.run("tails", cfg, workers=3)
    assert serial.csv_rows == parallel.csv_rows


def test_seed_changes_stochastic_output():
    base = {"lam": 0.3, "y_grid": [20], "budget": 100_000}
    a = cli.run("tails", cli.validate_config("tails", dict(base, master_seed=1)))
    b = cli.run("tails", cli.validate_config("tails", dict(base, master_seed=2)))
    assert a.csv_rows != b.csv_rows


def test_json_report_shape():
    cfg = cli.validate_config("exact-conditional", {"lam": 2.0, "n": 3, "k": 2})
    text = cli.write_report(cli.run("exact-conditional", cfg), "json")
    doc = json.loads(text)
    assert set(doc) == {"config", "results", "verdicts"}
    assert doc["config"]["experiment"] == "exact-conditional"
    probs = [r["prob"] for r in doc["results"]["rows"]]
    assert probs == pytest.approx([2 / 3, 1 / 3])
    assert doc["results"]["library_version"]
    echoed = dict(cfg, experiment="exact-conditional")
    assert doc["results"]["config_hash"] == cli.config_hash(echoed)


def test_json_renders_nan_as_null():
    text = cli._render_json({"x": float("nan"), "y": float("inf"), "z": 1.5})
    doc = json.loads(text)
    assert doc["x"] is None
    assert doc["y"] is None
    assert doc["z"] == 1.5


def test_csv_floats_round_trip():
    cfg = cli.validate_config("exact-conditional", {"lam": 2.0, "n": 6, "k": 12})
    report = cli.run("exact-conditional", cfg)
    text = cli.write_report(report, "csv")
    lines = text.strip().split("\n")[1:]
    parsed = [float(line.split(",")[1]) for line in lines]
    assert parsed == [r[1] for r in report.csv_rows]


def test_main_success(tmp_path, capsys):
    cfg = tmp_path / "enum.cfg"
    cfg.write_text("n=3\n")
    rc = cli.main(["enumerate", "--config", str(cfg)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "displacement,count" in out
    assert "0,24" in out


def test_main_writes_file(tmp_path):
    cfg = tmp_path / "enum.cfg"
    cfg.write_text('{"n": 2}')
    out = tmp_path / "out.csv"
    rc = cli.main(["enumerate", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert out.read_text() == "displacement,count\n0,6\n1,3\n"


def test_main_missing_config_file(tmp_path, capsys):
    rc = cli.main(["enumerate", "--config", str(tmp_path / "nope.cfg")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_main_invalid_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n=3\nunknown_knob=1\n")
    rc = cli.main(["enumerate", "--config", str(cfg)])
    assert rc == 1
    assert "unknown_knob" in capsys.readouterr().err


def test_main_domain_error(tmp_path, capsys):
    cfg = tmp_path / "tails.cfg"
    cfg.write_text("lam=0.5\ny_grid=10\nbudget=1000\n")
    rc = cli.main(["tails", "--config", str(cfg)])
    assert rc == 1
    assert "0.5" in capsys.readouterr().err


def test_main_usage_error_is_operational(capsys):
    rc = cli.main(["enumerate"])  # --config missing
    assert rc == 1


def test_main_verdict_failure_exits_two(tmp_path, capsys):
    # an impossible flatness demand makes the run finish but fail
    cfg = tmp_path / "be.cfg"
    cfg.write_text(
        json.dumps(
            {"lam": 2.0, "n_grid": [50, 200], "samples": 2000, "flatness_factor": 1.001}
        )
    )
    rc = cli.main(["berry-esseen", "--config", str(cfg)])
    assert rc == 2
    out = capsys.readouterr().out
    assert "N,samples,D,DsqrtN,ci" in out


def test_main_seed_override(tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("lam=0.3\ny_grid=20\nbudget=50000\n")
    assert cli.main(["tails", "--config", str(cfg), "--seed", "4"]) == 0
    first = capsys.readouterr().out
    assert cli.main(["tails", "--config", str(cfg), "--seed", "9"]) == 0
    second = capsys.readouterr().out
    assert first != second


def test_audit_hypotheses_run():
    cfg = cli.validate_config("audit-hypotheses", {"lam": 2.0, "n_grid": [50]})
    report = cli.run("audit-hypotheses", cfg)
    assert report.passed
    checks = {row[0]: row[3] for row in report.csv_rows}
    assert checks["c5"] is True
    assert report.verdicts["ledger_positive"]
    assert report.verdicts["local_limit_floor"]


def test_ld_conditional_run():
    cfg = cli.validate_config(
        "ld-conditional",
        {"n": 20, "k": 30, "y_grid": [0.5], "samples": 60_000},
    )
    report = cli.run("ld-conditional", cfg)
    assert report.csv_header == ("y", "hits", "draws", "normalized", "ci", "verdict")
    assert report.results["alpha"] > 0

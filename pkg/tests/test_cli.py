import csv
import json

import pytest

from nashgrid.cli import (ConfigError, config_to_json, load_config, main,
                          parse_config)


def small_config(**run_overrides):
    doc = {
        "model": {
            "firms": [
                {"c": 6.0, "k": 5.0, "b": 1.0,
                 "q_bar": {"kind": "constant", "value": 200.0}},
                {"c": 4.0, "k": 5.0, "b": 0.9,
                 "q_bar": {"kind": "constant", "value": 200.0}},
            ],
            "a": 1 / 1.1,
            "e": 1e-4,
        },
        "factors": {
            "r": {"kind": "truncated_normal", "mu": 0.0, "sigma": 0.25,
                  "lo": -0.5, "hi": 0.5},
            "s": {"kind": "truncated_normal", "mu": 5000.0, "sigma": 10.0,
                  "lo": 4950.0, "hi": 5050.0},
        },
        "discretization": {"n_r": 3, "n_s": 4},
        "solver": {"tolerance": 1e-8},
        "run": {"mode": "discretize", "parallelism": 1},
    }
    doc["run"].update(run_overrides)
    return doc


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_parse_config_round_trips():
    cfg = parse_config(small_config())
    again = parse_config(config_to_json(cfg))
    assert again == cfg
    assert cfg.instance.m == 2
    assert cfg.discretization.n_r == 3
    assert cfg.run.mode == "discretize"


def test_unknown_keys_rejected():
    doc = small_config()
    doc["extra"] = 1
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config(doc)
    doc = small_config()
    doc["model"]["markup"] = 2.0
    with pytest.raises(ConfigError, match="model"):
        parse_config(doc)
    doc = small_config()
    doc["run"]["threads"] = 4
    with pytest.raises(ConfigError, match="run"):
        parse_config(doc)


def test_model_invariants_surface_as_config_errors():
    doc = small_config()
    doc["model"]["a"] = 1.5
    with pytest.raises(ConfigError, match=r"a must lie in \(0, 1\)"):
        parse_config(doc)
    doc = small_config()
    doc["factors"]["s"] = {"kind": "uniform", "lo": -1.0, "hi": 100.0}
    with pytest.raises(ConfigError, match="s"):
        parse_config(doc)


def test_numbers_reject_booleans_and_strings():
    doc = small_config()
    doc["model"]["e"] = True
    with pytest.raises(ConfigError, match="expected a number"):
        parse_config(doc)
    doc = small_config()
    doc["solver"]["tolerance"] = "tight"
    with pytest.raises(ConfigError, match="expected a number"):
        parse_config(doc)


def test_factor_spec_validation():
    doc = small_config()
    doc["factors"]["r"] = {"kind": "gamma", "shape": 2.0}
    with pytest.raises(ConfigError, match="unknown kind"):
        parse_config(doc)
    doc = small_config()
    doc["factors"]["r"] = {"kind": "uniform", "lo": 0.0}
    with pytest.raises(ConfigError, match="missing keys"):
        parse_config(doc)
    doc = small_config()
    doc["factors"]["betas"] = [{"kind": "constant", "value": 1.0}]
    with pytest.raises(ConfigError, match="one distribution per firm"):
        parse_config(doc)


def test_rule_validation():
    doc = small_config()
    doc["discretization"]["rules"] = {"r": "upper_endpoint"}
    with pytest.raises(ConfigError, match="unknown rule"):
        parse_config(doc)
    doc["discretization"]["rules"] = {"time": "midpoint"}
    with pytest.raises(ConfigError, match="unknown group"):
        parse_config(doc)


def test_ladder_validation():
    doc = small_config(ladder=[[10, 20], [20, 3.5]])
    with pytest.raises(ConfigError, match="ladder"):
        parse_config(doc)


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"model": }')
    with pytest.raises(ConfigError, match=r"broken\.json:1:11"):
        load_config(str(path))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.json"))


def test_dump_config_normalizes(tmp_path, capsys):
    path = write_config(tmp_path, small_config())
    assert main(["solve", "--config", path, "--dump-config"]) == 0
    dumped = json.loads(capsys.readouterr().out)
    assert parse_config(dumped) == load_config(path)
    # defaults are materialized in the dump
    assert dumped["factors"]["alpha"] == {"kind": "constant", "value": 0.0}
    assert dumped["solver"]["max_iterations"] == 1000


def test_cli_deterministic_mode(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(tmp_path, small_config(mode="deterministic"))
    assert main(["solve", "--config", path, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "summary.csv" in text
    with open(out / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["component"] for r in rows] == ["u_1", "u_2"]
    assert all(float(r["mean"]) > 0.0 for r in rows)


def test_cli_discretize_mode_with_cell_dump(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(tmp_path, small_config(dump_cells=True))
    assert main(["solve", "--config", path, "--out", str(out)]) == 0
    capsys.readouterr()
    assert (out / "summary.csv").exists()
    with open(out / "cells.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12  # 3 r-cells x 4 s-cells
    assert all(float(r["residual"]) <= 1e-8 for r in rows)


def test_cli_mode_override_and_threads(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(tmp_path, small_config())
    code = main(["solve", "--config", path, "--out", str(out),
                 "--mode", "deterministic", "--threads", "2"])
    assert code == 0
    capsys.readouterr()
    assert (out / "summary.csv").exists()


def test_cli_oracle_mode(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(tmp_path, small_config(mode="oracle", n_samples=100,
                                               seed=4))
    assert main(["solve", "--config", path, "--out", str(out)]) == 0
    capsys.readouterr()
    with open(out / "oracle.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert int(rows[0]["n_samples"]) == 100
    assert int(rows[0]["seed"]) == 4


def test_cli_ladder_mode(tmp_path, capsys):
    out = tmp_path / "out"
    doc = small_config(mode="ladder", ladder=[[2, 2], [4, 4], [8, 8]])
    path = write_config(tmp_path, doc)
    assert main(["solve", "--config", path, "--out", str(out)]) == 0
    capsys.readouterr()
    with open(out / "ladder.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert int(rows[0]["n_r"]) == 4
    assert int(rows[1]["n_r"]) == 8
    # refinement deltas should shrink as the mesh doubles
    assert float(rows[1]["max_delta"]) < float(rows[0]["max_delta"])


def test_cli_ladder_needs_two_levels(tmp_path, capsys):
    path = write_config(tmp_path, small_config(mode="ladder", ladder=[[2, 2]]))
    assert main(["solve", "--config", path]) == 2
    assert "ladder" in capsys.readouterr().err


def test_cli_flagged_cells_exit_code(tmp_path, capsys):
    doc = small_config(max_flagged_fraction=1.0)
    doc["solver"] = {"max_iterations": 1, "initial_step": 1e-9}
    out = tmp_path / "out"
    path = write_config(tmp_path, doc)
    assert main(["solve", "--config", path, "--out", str(out)]) == 1
    assert "flagged" in capsys.readouterr().err
    # with a zero budget the sweep aborts instead, still exit 1
    doc["run"]["max_flagged_fraction"] = 0.0
    path = write_config(tmp_path, doc, "strict.json")
    assert main(["solve", "--config", path, "--out", str(out)]) == 1


def test_cli_config_errors_exit_2(tmp_path, capsys):
    doc = small_config()
    doc["model"]["a"] = 1.5
    path = write_config(tmp_path, doc)
    assert main(["solve", "--config", path]) == 2
    err = capsys.readouterr().err
    assert "config error" in err
    assert "a must lie in (0, 1)" in err
    assert main(["solve", "--config", str(tmp_path / "nope.json")]) == 2
    capsys.readouterr()


def test_cli_bad_thread_count(tmp_path, capsys):
    path = write_config(tmp_path, small_config())
    assert main(["solve", "--config", path, "--threads", "0"]) == 2
    assert "--threads" in capsys.readouterr().err


def test_cli_no_subcommand_prints_help(capsys):
    assert main([]) == 2
    assert "solve" in capsys.readouterr().out


def test_console_entry_point_installed():
    import shutil
    exe = shutil.which("nashgrid")
    assert exe is not None

"""CLI contract: validation diagnostics, outputs, determinism, formats."""

import csv
import json
import re
from pathlib import Path

import numpy as np
import pytest

from emspec import delta_m1_exact, delta_m2_exact
from emspec.cli import main, validate_config

SCI17 = re.compile(r"^-?\d\.\d{16}e[+-]\d{2,3}$")


def write_config(tmp_path, name, config):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def woe_config(tmp_path, out, **overrides):
    config = {
        "experiment": "woe-emerging",
        "n_series": 64,
        "horizon": 32,
        "q": 1.001,
        "realizations": 10,
        "master_seed": 1,
        "output_dir": str(tmp_path / out),
        "figures": False,
        "histogram": {"bins": 16},
    }
    config.update(overrides)
    return config


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def test_validate_rejects_low_exponent():
    diags = validate_config({"experiment": "woe-emerging", "n_series": 64,
                             "horizon": 32, "q": 0.5, "realizations": 1})
    errors = [d for d in diags if d["level"] == "error"]
    assert any("exponent below 1" in d["message"] for d in errors)


def test_validate_warns_on_small_kappa():
    diags = validate_config({"experiment": "woe-emerging", "n_series": 640,
                             "horizon": 32, "q": 1.001, "realizations": 1})
    warnings = [d for d in diags if d["level"] == "warning"]
    assert any("linear response unreliable" in d["message"] for d in warnings)


def test_validate_clean_config_is_empty():
    assert validate_config({"experiment": "woe-emerging", "n_series": 64,
                            "horizon": 32, "q": 1.001, "realizations": 2}) == []


def test_validate_returns_all_violations():
    diags = validate_config({"experiment": "woe-emerging", "n_series": 1,
                             "horizon": 0, "q": 0.5, "realizations": 0})
    errors = [d for d in diags if d["level"] == "error"]
    assert len(errors) >= 4


def test_validate_population_requirements():
    diags = validate_config({"experiment": "cwoe-one-block", "n_series": 64,
                             "horizon": 32, "q": 1.001, "realizations": 1})
    assert any(d["field"] == "population" for d in diags)
    diags = validate_config({"experiment": "cwoe-blocks", "n_series": 64,
                             "horizon": 32, "q": 1.001, "realizations": 1,
                             "population": {"kind": "block-diagonal",
                                            "blocks": [[32, 0.5], [16, 0.2]]}})
    assert any("sum to 48" in d["message"] for d in diags)


def test_validate_theory_table_requirements():
    diags = validate_config({"experiment": "theory-table",
                             "theory_table": {"quantities": ["delta_m2_exact"],
                                              "horizons": [16]}})
    fields = {d["field"] for d in diags if d["level"] == "error"}
    assert "theory_table.alpha" in fields
    assert "theory_table.n_series" in fields
    diags = validate_config({"experiment": "theory-table",
                             "theory_table": {"quantities": ["no_such_thing"],
                                              "horizons": [16]}})
    assert any("unknown quantity" in d["message"] for d in diags)


def test_validate_subcommand_exit_codes(tmp_path, capsys):
    good = write_config(tmp_path, "good.json", woe_config(tmp_path, "o1"))
    assert main(["validate", "--config", good]) == 0
    assert json.loads(capsys.readouterr().out) == []
    bad = write_config(tmp_path, "bad.json", woe_config(tmp_path, "o2", q=0.5))
    assert main(["validate", "--config", bad]) == 2
    diags = json.loads(capsys.readouterr().out)
    assert diags and diags[0]["level"] == "error"


def test_run_invalid_config_emits_error_json(tmp_path, capsys):
    bad = write_config(tmp_path, "bad.json", woe_config(tmp_path, "o", q=0.5))
    assert main(["run", "--config", bad]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "invalid config"
    assert err["diagnostics"]


def test_run_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert "cannot load config" in err["error"]


# ---------------------------------------------------------------------------
# run outputs
# ---------------------------------------------------------------------------

def test_run_is_bit_deterministic(tmp_path, capsys):
    cfg = write_config(tmp_path, "c.json", woe_config(tmp_path, "a"))
    assert main(["run", "--config", cfg]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    for name in ("moments.csv", "density_bulk.csv", "density_corrections.csv",
                 "density_emerging.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name


def test_run_worker_count_does_not_change_output(tmp_path, capsys):
    cfg = write_config(tmp_path, "c.json", woe_config(tmp_path, "w1"))
    assert main(["run", "--config", cfg]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "w2"),
                 "--workers", "2"]) == 0
    capsys.readouterr()
    for name in ("moments.csv", "density_bulk.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == \
            (tmp_path / "w2" / name).read_bytes()


def test_env_var_worker_fallback(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("EMSPEC_WORKERS", "2")
    cfg = write_config(tmp_path, "c.json", woe_config(tmp_path, "env"))
    assert main(["run", "--config", cfg]) == 0
    capsys.readouterr()
    record = json.loads((tmp_path / "env" / "run.json").read_text())
    assert record["workers"] == 2


def test_run_outputs_and_provenance(tmp_path, capsys):
    cfg = write_config(tmp_path, "c.json", woe_config(tmp_path, "out"))
    assert main(["run", "--config", cfg]) == 0
    status = json.loads(capsys.readouterr().out)
    assert status["status"] == "ok"
    out = tmp_path / "out"
    record = json.loads((out / "run.json").read_text())
    assert record["config"]["n_series"] == 64
    assert set(record["versions"]) == {"emspec", "numpy", "python"}
    assert record["wall_time_s"] > 0
    for name in record["outputs"]:
        assert (out / name).exists()
    rank = json.loads((out / "rank_check.json").read_text())
    assert rank["zero_modes_per_realization"] == [32] * 10


def test_density_csv_format(tmp_path, capsys):
    cfg = write_config(tmp_path, "c.json", woe_config(tmp_path, "fmt"))
    assert main(["run", "--config", cfg]) == 0
    capsys.readouterr()
    with open(tmp_path / "fmt" / "density_bulk.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bin_lo", "bin_hi", "density", "theory"]
    assert len(rows) == 17
    for row in rows[1:]:
        for value in row[:3]:
            assert SCI17.match(value), value
        assert row[3] == "" or SCI17.match(row[3])


def test_moments_csv_matches_module_values(tmp_path, capsys):
    cfg = write_config(tmp_path, "c.json", woe_config(tmp_path, "mom"))
    assert main(["run", "--config", cfg]) == 0
    capsys.readouterr()
    with open(tmp_path / "mom" / "moments.csv") as fh:
        rows = {r["quantity"]: r for r in csv.DictReader(fh)}
    alpha = 1.001 - 1.0  # the runner derives alpha from q in floating point
    assert float(rows["delta_m1_total"]["theory_exact"]) == \
        delta_m1_exact(32, alpha)
    assert float(rows["delta_m2_total"]["theory_exact"]) == \
        delta_m2_exact(32, 64, alpha)
    emp1 = float(rows["delta_m1_emerging"]["empirical"])
    emp2 = float(rows["delta_m1_bulk"]["empirical"])
    assert emp1 + emp2 == pytest.approx(float(rows["delta_m1_total"]["empirical"]),
                                        rel=1e-9)


def test_oneblock_run_emits_six_density_tables(tmp_path, capsys):
    config = {
        "experiment": "cwoe-one-block",
        "n_series": 96, "horizon": 48, "q": 1.001, "realizations": 6,
        "master_seed": 2, "output_dir": str(tmp_path / "ob"),
        "figures": False, "histogram": {"bins": 12},
        "population": {"kind": "one-block", "c": 0.5},
    }
    cfg = write_config(tmp_path, "c.json", config)
    assert main(["run", "--config", cfg]) == 0
    capsys.readouterr()
    for name in ("density_bulk", "density_corrections", "density_emerging",
                 "separated_bulk", "separated_corrections",
                 "separated_emerging"):
        assert (tmp_path / "ob" / f"{name}.csv").exists(), name


def test_blocks_run_emits_overlap_table(tmp_path, capsys):
    config = {
        "experiment": "cwoe-blocks",
        "n_series": 64, "horizon": 32, "q": 1.001, "realizations": 4,
        "master_seed": 2, "output_dir": str(tmp_path / "blk"),
        "figures": False, "histogram": {"bins": 10},
        "population": {"kind": "block-diagonal",
                       "blocks": [[32, 0.9], [16, 0.45], [16, 0.225]]},
    }
    cfg = write_config(tmp_path, "c.json", config)
    assert main(["run", "--config", cfg]) == 0
    capsys.readouterr()
    with open(tmp_path / "blk" / "block_overlap.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    for row in rows:
        total = sum(float(row[f"block_{i}"]) for i in (1, 2, 3))
        assert total == pytest.approx(1.0, abs=1e-9)


def test_portfolio_run_csv_columns(tmp_path, capsys):
    config = {
        "experiment": "portfolio", "realizations": 4, "master_seed": 7,
        "output_dir": str(tmp_path / "pf"), "figures": False,
        "portfolio": {"n_assets": 30, "n_blocks": 5,
                      "horizons": [20, 60], "q_grid": [1.5, 2.0]},
    }
    cfg = write_config(tmp_path, "c.json", config)
    assert main(["run", "--config", cfg]) == 0
    capsys.readouterr()
    with open(tmp_path / "pf" / "portfolio.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["method", "T", "q", "mean_ratio", "stderr",
                      "homogeneous_ratio"]
    raw20 = [r for r in rows if r[0] == "sample-raw" and r[1] == "20"][0]
    assert raw20[3] == ""  # singular: emitted as missing, not zero
    assert len({r[5] for r in rows[1:]}) == 1  # homogeneous column constant


def test_theory_table_matches_module(tmp_path, capsys):
    config = {
        "experiment": "theory-table", "output_dir": str(tmp_path / "tt"),
        "theory_table": {
            "quantities": ["delta_m1_exact"],
            "horizons": [2, 4, 64, 1024],
            "alpha": 0.001,
        },
    }
    cfg = write_config(tmp_path, "c.json", config)
    assert main(["theory-table", "--config", cfg]) == 0
    capsys.readouterr()
    with open(tmp_path / "tt" / "theory_table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    for row in rows:
        expected = delta_m1_exact(int(row["T"]), 0.001)
        assert float(row["value"]) == expected  # same code path, exact match


def test_figures_rendered_when_enabled(tmp_path, capsys):
    config = woe_config(tmp_path, "figs", figures=True)
    cfg = write_config(tmp_path, "c.json", config)
    assert main(["run", "--config", cfg]) == 0
    capsys.readouterr()
    out = tmp_path / "figs"
    assert (out / "density_bulk.png").exists()
    assert (out / "moments.png").exists()
    assert (out / "density_bulk.png").stat().st_size > 1000


def test_config_round_trips_through_run_record(tmp_path, capsys):
    config = woe_config(tmp_path, "rt")
    cfg = write_config(tmp_path, "c.json", config)
    assert main(["run", "--config", cfg, "--seed", "99"]) == 0
    capsys.readouterr()
    record = json.loads((Path(config["output_dir"]) / "run.json").read_text())
    assert record["config"]["master_seed"] == 99  # flag overrides file
    rerun = dict(record["config"])
    assert rerun["n_series"] == config["n_series"]
    assert rerun["histogram"] == config["histogram"]

# tests/test_cli.py - End-to-end runs of app.main with exit codes and written files.

import json

import pandas as pd
import pytest

import app
from components.reports import HISTOGRAM_COLUMNS, SELLER_COLUMNS, SUMMARY_COLUMNS
from engine.sweep import SWEEP_COLUMNS
from market.cdf import TabulatedCdf
from market.profiles import save_profile
from market.strategies import MixedFull, PurePoint, StrategyProfile


def _config(tmp_path, body: str = "store_counts=1,1,1\nmu=0.25\nc=1\nM=100\n"):
    path = tmp_path / "market.cfg"
    path.write_text(body)
    return str(path)


@pytest.fixture(autouse=True)
def _quiet_env(monkeypatch) -> None:
    monkeypatch.setenv("SEARCHEQ_LOG_LEVEL", "WARNING")
    monkeypatch.delenv("SEARCHEQ_WORKERS", raising=False)


def test_construct_then_verify(tmp_path, capsys) -> None:
    cfg = _config(tmp_path)
    out = str(tmp_path / "out")
    assert app.main(["construct", "--config", cfg, "--out", out]) == 0
    assert "reserve price P_M" in capsys.readouterr().out
    assert (tmp_path / "out" / "summary.txt").exists()

    code = app.main(["verify", "--config", cfg, "--profile", out + "/profile.json", "--out", out])
    assert code == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["passed"]
    assert [c["name"] for c in report["checks"]][0] == "support_bound"


def test_invalid_config_exits_2(tmp_path, capsys) -> None:
    cfg = _config(tmp_path, "store_counts=1,1,1\nmu=1\nc=1\nM=100\n")
    assert app.main(["construct", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("Error:")


def test_support_above_reserve_fails_verification(tmp_path) -> None:
    cfg = _config(tmp_path)
    wide = MixedFull(TabulatedCdf.uniform(2.0, 4.0))
    profile_path = save_profile(StrategyProfile((PurePoint(3.0), wide, wide), 3.0), str(tmp_path / "bad.json"))
    code = app.main(["verify", "--config", cfg, "--profile", profile_path, "--out", str(tmp_path), "--grid", "1000"])
    assert code == 1
    report = json.loads((tmp_path / "report.json").read_text())
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    assert "support_bound" in failed


def test_profile_for_another_market_exits_2(tmp_path, capsys) -> None:
    chain_cfg = _config(tmp_path, "store_counts=3,1,1\nmu=0.1666666667\nc=1\nM=100\n")
    out = str(tmp_path / "chain")
    assert app.main(["construct", "--config", chain_cfg, "--out", out]) == 0
    capsys.readouterr()

    cfg = _config(tmp_path)
    profile = out + "/profile.json"
    assert app.main(["verify", "--config", cfg, "--profile", profile, "--out", out]) == 2
    assert "store counts" in capsys.readouterr().err
    assert app.main(["simulate", "--config", cfg, "--profile", profile, "--reps", "10", "--out", out]) == 2


def test_malformed_profile_exits_2(tmp_path) -> None:
    cfg = _config(tmp_path)
    broken = tmp_path / "broken.json"
    broken.write_text('{"schema_version": 1, "sellers": [')
    assert app.main(["verify", "--config", cfg, "--profile", str(broken), "--out", str(tmp_path)]) == 2


def test_zero_replications_exits_2(tmp_path) -> None:
    cfg = _config(tmp_path)
    assert app.main(["simulate", "--config", cfg, "--reps", "0", "--out", str(tmp_path)]) == 2


def test_simulate_writes_tables(tmp_path) -> None:
    cfg = _config(tmp_path)
    out = tmp_path / "sim"
    assert app.main(["simulate", "--config", cfg, "--reps", "2000", "--seed", "42", "--out", str(out)]) == 0
    assert list(pd.read_csv(out / "simulation_sellers.csv").columns) == SELLER_COLUMNS
    assert list(pd.read_csv(out / "simulation_summary.csv").columns) == SUMMARY_COLUMNS
    histogram = pd.read_csv(out / "price_paid_histogram.csv")
    assert list(histogram.columns) == HISTOGRAM_COLUMNS
    assert histogram["mass"].sum() == pytest.approx(1.0, abs=1e-9)


def test_sweep_writes_table(tmp_path) -> None:
    cfg = _config(tmp_path)
    out = tmp_path / "sweep"
    code = app.main(["sweep", "--config", cfg, "--counts", "1,1,1;3,1,1", "--mus", "0.25,0.5", "--out", str(out)])
    assert code == 0
    table = pd.read_csv(out / "sweep.csv", keep_default_na=False)
    assert list(table.columns) == SWEEP_COLUMNS
    assert len(table) == 4


def test_bad_counts_flag(tmp_path) -> None:
    cfg = _config(tmp_path)
    assert app.main(["sweep", "--config", cfg, "--counts", "1,x", "--out", str(tmp_path)]) == 2

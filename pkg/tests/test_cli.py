from __future__ import annotations

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropix import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, obj, name="cfg.json") -> Path:
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=2))
    return path


FCS_SMALL = {
    "version": 1,
    "task": "functional",
    "chain": {"preset": "constant", "params": {"beta_l": 1.0, "beta_r": 2.0}},
    "kind": "FCS",
    "grids": {"alpha": {"start": -1.0, "stop": 2.0, "step": 0.25}, "t": [2.0]},
    "interval": {"M": 4},
}


def test_expand_grid():
    assert cli.expand_grid({"start": 0.0, "stop": 1.0, "step": 0.25}) == (0.0, 0.25, 0.5, 0.75, 1.0)
    g = cli.expand_grid({"start": -1.0, "stop": 2.0, "step": 0.05})
    assert len(g) == 61 and 0.0 in g and 1.0 in g
    assert cli.expand_grid([1, "inf"]) == (1.0, math.inf)
    assert cli.expand_grid(3) == (3.0,)
    with pytest.raises(cli.ConfigError):
        cli.expand_grid(["x"])


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_round_trip(path):
    cfg = cli.load_config(path)
    assert cli.parse_config(cli.emit_config(cfg)) == cfg


@settings(max_examples=30, deadline=None)
@given(
    alphas=st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=5),
    t=st.floats(0.1, 10),
    M=st.integers(1, 20),
    kind=st.sampled_from(["ES", "FCS", "EINF"]),
    threads=st.one_of(st.none(), st.integers(1, 4)),
)
def test_property_round_trip(alphas, t, M, kind, threads):
    raw = {"version": 1, "task": "functional", "chain": {"preset": "step_J"}, "kind": kind,
           "grids": {"alpha": alphas, "t": [t]}, "interval": {"M": M}}
    if threads is not None:
        raw["threads"] = threads
    cfg = cli.parse_config(json.dumps(raw))
    assert cli.parse_config(cli.emit_config(cfg)) == cfg


def test_schema_errors_name_field_and_line():
    text = json.dumps({**FCS_SMALL, "kind": "BOGUS"}, indent=2)
    with pytest.raises(cli.ConfigError) as exc:
        cli.parse_config(text)
    line = next(i for i, ln in enumerate(text.splitlines(), 1) if '"kind"' in ln)
    assert exc.value.where == f"line {line}, field kind"
    with pytest.raises(cli.ConfigError, match="field grids/alpha"):
        cli.parse_config(json.dumps({**FCS_SMALL, "grids": {"alpha": [], "t": [1.0]}}))
    with pytest.raises(cli.ConfigError, match="line 1, column"):
        cli.parse_config("{not json")
    with pytest.raises(cli.ConfigError, match="version"):
        cli.parse_config(json.dumps({**FCS_SMALL, "version": 2}))
    with pytest.raises(cli.ConfigError, match="needs 'kind'"):
        cli.parse_config(json.dumps({k: v for k, v in FCS_SMALL.items() if k != "kind"}))
    with pytest.raises(cli.ConfigError, match="chain"):
        cli.parse_config(json.dumps({**FCS_SMALL, "chain": {"preset": "nope"}}))
    with pytest.raises(cli.ConfigError, match="requested"):
        cli.parse_config(json.dumps(FCS_SMALL), task="limit")


def test_main_config_error_exit(tmp_path, capsys):
    path = write(tmp_path, {**FCS_SMALL, "grids": {"alpha": "x", "t": [1.0]}})
    assert cli.main(["functional", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "field grids/alpha" in capsys.readouterr().err


def test_functional_run_and_plotdata(tmp_path):
    path = write(tmp_path, FCS_SMALL)
    assert cli.main(["functional", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_OK
    lines = (tmp_path / "functional.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    assert len(rows) == 13
    for r in rows:
        if float(r["alpha"]) in (0.0, 1.0):
            assert abs(float(r["value"])) < 1e-9
    meta = json.loads((tmp_path / "functional.json").read_text())
    assert meta["passed"] and meta["config"] == cli.parse_config(path.read_text()).to_dict()
    dat = (tmp_path / "functional.dat").read_text().splitlines()
    assert dat[0].startswith("#") and len(dat) == 14
    assert all(len(ln.split()) == 2 for ln in dat[1:])
    caption = (tmp_path / "functional.caption.txt").read_text()
    assert "constant" in caption


def test_rerun_is_bit_identical(tmp_path):
    cfg = cli.parse_config(json.dumps(FCS_SMALL))
    a = cli.run(cfg)
    b = cli.run(cli.parse_config(cli.emit_config(cfg)))
    assert a.to_csv() == b.to_csv()
    c = cli.run(cfg, threads=3)
    assert c.to_csv() == a.to_csv()


def test_pool_map_keeps_grid_order():
    import time

    def slow(i):
        time.sleep(0.002 * (5 - i % 5))
        return i * i

    assert cli._pool_map(slow, list(range(12)), 4) == [i * i for i in range(12)]


def test_resource_cap_exit(tmp_path):
    cfg = {**FCS_SMALL, "limits": {"max_points": 3}}
    path = write(tmp_path, cfg)
    assert cli.main(["functional", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_RESOURCE
    record = json.loads((tmp_path / "functional.failure.json").read_text())
    assert record["status"] == "resource_cap"
    path = write(tmp_path, {"version": 1, "task": "verify", "chain": {"preset": "constant"}, "grids": {"N": [12]}})
    assert cli.main(["verify", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_RESOURCE


def test_verification_failure_exit(tmp_path):
    # a tolerance below rounding makes the oracle comparisons fail
    path = write(tmp_path, {"version": 1, "task": "verify", "chain": {"preset": "constant"}, "grids": {"N": [4]}})
    assert cli.main(["verify", "--config", str(path), "--out", str(tmp_path), "--tol", "1e-30"]) == cli.EXIT_VERIFY
    record = json.loads((tmp_path / "verify.failure.json").read_text())
    assert record["status"] == "verification_failed" and record["failures"]


def test_verify_small_passes(tmp_path):
    path = write(tmp_path, {"version": 1, "task": "verify", "chain": {"preset": "constant"}, "grids": {"N": [4]}})
    assert cli.main(["verify", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_OK
    meta = json.loads((tmp_path / "verify.json").read_text())
    assert meta["passed"] and not meta["failures"]


def test_scattering_task(tmp_path):
    path = write(tmp_path, {"version": 1, "task": "scattering", "chain": {"preset": "step_J"},
                            "grids": {"E": {"start": -2.0, "stop": 2.0, "step": 0.1}}})
    table = cli.run(cli.load_config(path))
    inside = table.columns["in_support"] == 1.0
    assert inside.any() and not inside.all()
    T = table.columns["transmission"]
    assert np.all((T[inside] > 0) & (T[inside] < 1))
    assert np.all(T[~inside] == 0)
    assert table.metadata["passed"]
    cli.emit_plotdata(table, "scattering", tmp_path / "scan.dat")
    assert all(len(ln.split()) == 4 for ln in (tmp_path / "scan.dat").read_text().splitlines()[1:])


def test_rates_task():
    cfg = cli.parse_config(json.dumps({"version": 1, "task": "rates", "chain": {"preset": "step_J"}, "which": "FCS",
                                       "grids": {"theta": [0.002, 0.005, 0.01]}}))
    table = cli.run(cfg)
    assert table.metadata["verdicts"]["fluctuation_relation"]["passed"]
    assert table.metadata["verdicts"]["vanishes_at_mean"]["passed"]


def test_converge_plot_columns(tmp_path):
    cfg = cli.parse_config(json.dumps({"version": 1, "task": "converge", "chain": {"preset": "constant"},
                                       "kind": "EP", "grids": {"alpha": [0.5], "t": [2, 4]}}))
    table = cli.run(cfg)
    dat, _ = cli.emit_plotdata(table, "converge", tmp_path / "conv.dat")
    rows = dat.read_text().splitlines()
    assert rows[0].split()[1:] == ["t", "value", "limit"]
    assert len(rows) == 3


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "entropix.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify" in res.stdout

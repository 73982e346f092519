import csv
import json
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("GRIDFLOW_CLI", "gridflow")
DATA = Path(os.environ.get("GRIDFLOW_DATA", Path(__file__).resolve().parents[2] / "data"))


def run(*args, check=True):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, timeout=120)
    if check and proc.returncode != 0:
        raise AssertionError(f"exit {proc.returncode}: {proc.stderr}")
    return proc


def test_pf_writes_traces(tmp_path):
    run("pf", DATA / "case33bw.json", "--model", "md", "--out", tmp_path)
    summary = json.loads((tmp_path / "case33bw_md_1_summary.json").read_text())
    assert summary["errors_vs_acpf"]["max_v_pct"] < 0.03
    with open(tmp_path / "case33bw_md_1_bus.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 33
    assert float(rows[0]["v"]) == pytest.approx(1.05)


def test_compare_table(tmp_path):
    run("compare", DATA / "case33bw.json", "--scales", "1,2.5", "--out", tmp_path)
    with open(tmp_path / "compare.csv") as f:
        rows = list(csv.DictReader(f))
    assert {(r["scale"], r["model"]) for r in rows} == {("1", "md"), ("1", "sd"), ("2.5", "md"), ("2.5", "sd")}
    heavy = next(r for r in rows if r["scale"] == "2.5" and r["model"] == "md")
    assert float(heavy["acpf_v_min"]) == pytest.approx(0.813, abs=0.005)
    assert (tmp_path / "trace_2.5.csv").exists()


def test_reconfig_scenario_with_oracle_then_evaluate(tmp_path):
    run("reconfig", "--scenario", DATA / "scenarios" / "s1.json", "--oracle", "--out", tmp_path)
    sol = json.loads((tmp_path / "s1.json").read_text())
    assert sol["status"] == "optimal"
    assert set(sol["open_branches"]) == {"7-8", "9-10", "14-15", "32-33", "25-29"}
    assert sol["loss_acpf_kw"] == pytest.approx(125.43, rel=0.015)
    oracle = json.loads((tmp_path / "s1_oracle.json").read_text())
    assert oracle["open_branches"] == sol["open_branches"]
    proc = run("evaluate", DATA / "case33bw.json", tmp_path / "s1.json", "--alpha", "1000")
    assert json.loads(proc.stdout)["matches_stored"] is True


def test_seedless_repeatability(tmp_path):
    run("reconfig", DATA / "overlapping_loops.json", "--alpha", "30", "--beta", "0.2", "--seedless",
        "--label", "ol", "--out", tmp_path)
    assert json.loads((tmp_path / "ol.json").read_text())["status"] == "optimal"


def test_exit_codes(tmp_path):
    assert run("reconfig", DATA / "overlapping_loops.json", "--vmin", "1.049", "--out", tmp_path,
               check=False).returncode == 3
    assert run("reconfig", DATA / "case33bw.json", "--max-nodes", "1", "--out", tmp_path,
               check=False).returncode == 4
    assert run("pf", tmp_path / "missing.json", check=False).returncode != 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"status": "optimal", "open_branches": ["2-3"], "svc": [], "objective_model": 0,'
                   ' "terms": {"loss": 0, "switching": 0, "deviation": 0}}')
    assert run("evaluate", DATA / "case33bw.json", bad, "--alpha", "1000", check=False).returncode == 2
